use super::geometry::Geometry;
use crate::error::{invalid, Error, Result};

/// `c_cos cos(ξ·x) + c_sin sin(ξ·x)` for an integer frequency `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTerm {
    pub freq: Vec<i64>,
    pub cos: f64,
    pub sin: f64,
}

/// `c Π_i He_{k_i}(x_i)` with probabilists' Hermite polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteTerm {
    pub degrees: Vec<u32>,
    pub coef: f64,
}

/// Test functions with a closed-form Poisson extension.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    Fourier(Vec<FourierTerm>),
    Hermite(Vec<HermiteTerm>),
}

const SUPPORTED: &str = "torus: finite Fourier sums (cos, sin, cosK, sinK); gauss: finite Hermite sums (heK)";

impl TestFunction {
    pub fn zero_fourier() -> Self {
        TestFunction::Fourier(Vec::new())
    }

    /// `cos(k x_1)` in dimension `n`.
    pub fn cos(n: usize, k: i64) -> Self {
        let mut freq = vec![0; n];
        freq[0] = k;
        TestFunction::Fourier(vec![FourierTerm { freq, cos: 1.0, sin: 0.0 }])
    }

    pub fn sin(n: usize, k: i64) -> Self {
        let mut freq = vec![0; n];
        freq[0] = k;
        TestFunction::Fourier(vec![FourierTerm { freq, cos: 0.0, sin: 1.0 }])
    }

    /// `He_k(x_1)` in dimension `n`.
    pub fn hermite(n: usize, k: u32) -> Self {
        let mut degrees = vec![0; n];
        degrees[0] = k;
        TestFunction::Hermite(vec![HermiteTerm { degrees, coef: 1.0 }])
    }

    /// Parses `+`-separated named modes: `zero`, `cos`, `sin`, `cosK`, `sinK`, `heK`,
    /// each optionally prefixed by `c*`.
    pub fn parse(spec: &str, n: usize) -> Result<Self> {
        let mut fourier = Vec::new();
        let mut hermite = Vec::new();
        for raw in spec.split('+').map(str::trim) {
            let (coef, name) = match raw.split_once('*') {
                Some((c, nm)) => (c.trim().parse::<f64>().map_err(|_| Error::Invalid(format!("bad coefficient in `{raw}`")))?, nm.trim()),
                None => (1.0, raw),
            };
            let num = |prefix: &str| -> Result<i64> {
                let rest = &name[prefix.len()..];
                if rest.is_empty() {
                    Ok(1)
                } else {
                    rest.parse().map_err(|_| Error::Invalid(format!("bad mode index in `{raw}`")))
                }
            };
            if name == "zero" {
                continue;
            } else if name.starts_with("cos") {
                let mut freq = vec![0; n];
                freq[0] = num("cos")?;
                fourier.push(FourierTerm { freq, cos: coef, sin: 0.0 });
            } else if name.starts_with("sin") {
                let k = num("sin")?;
                let mut freq = vec![0; n];
                freq[0] = k;
                fourier.push(FourierTerm { freq, cos: 0.0, sin: coef });
            } else if name.starts_with("he") {
                let k = num("he")?;
                if k < 0 {
                    return invalid(format!("negative Hermite degree in `{raw}`"));
                }
                let mut degrees = vec![0; n];
                degrees[0] = k as u32;
                hermite.push(HermiteTerm { degrees, coef });
            } else {
                return Err(Error::Unsupported(format!("unknown test function `{raw}`; supported: zero, {SUPPORTED}")));
            }
        }
        match (fourier.is_empty(), hermite.is_empty()) {
            (_, true) => Ok(TestFunction::Fourier(fourier)),
            (true, false) => Ok(TestFunction::Hermite(hermite)),
            _ => Err(Error::Unsupported("Fourier and Hermite modes cannot be mixed".into())),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            TestFunction::Fourier(t) => t.first().map(|t| t.freq.len()),
            TestFunction::Hermite(t) => t.first().map(|t| t.degrees.len()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TestFunction::Fourier(t) => t.iter().all(|t| t.cos == 0.0 && t.sin == 0.0),
            TestFunction::Hermite(t) => t.iter().all(|t| t.coef == 0.0),
        }
    }

    /// True when `f` integrates to zero against `μ_φ`.
    pub fn is_mean_zero(&self) -> bool {
        match self {
            TestFunction::Fourier(t) => t.iter().all(|t| t.freq.iter().any(|&k| k != 0) || t.cos == 0.0),
            TestFunction::Hermite(t) => t.iter().all(|t| t.degrees.iter().any(|&k| k != 0) || t.coef == 0.0),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Fourier(t) => t.iter().map(|t| {
                let ph = phase(&t.freq, x);
                t.cos * ph.cos() + t.sin * ph.sin()
            }).sum(),
            TestFunction::Hermite(t) => t.iter().map(|t| t.coef * t.degrees.iter().zip(x).map(|(&k, &v)| hermite(k, v)).product::<f64>()).sum(),
        }
    }
}

fn phase(freq: &[i64], x: &[f64]) -> f64 {
    freq.iter().zip(x).map(|(&k, &v)| k as f64 * v).sum()
}

/// Probabilists' Hermite polynomial by the three-term recurrence.
pub fn hermite(k: u32, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if k == 0 {
        return a;
    }
    for j in 1..k {
        let c = x * b - j as f64 * a;
        a = b;
        b = c;
    }
    b
}

/// Value and full gradient of `Q f` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldValue {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub d_y: f64,
}

/// `Q f(x, y) = e^{−y √(−Δ_φ)} f(x)` by modal evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonField {
    geom: Geometry,
    f: TestFunction,
    /// Per term: `√λ` of the mode.
    roots: Vec<f64>,
}

impl PoissonField {
    pub fn new(geom: Geometry, f: TestFunction, a: f64) -> Result<Self> {
        if a != 0.0 {
            return Err(Error::Unsupported(format!("only a = 0 is implemented for the example geometries, got a = {a}")));
        }
        let n = geom.dim();
        if let Some(d) = f.dim() {
            if d != n {
                return Err(Error::Dimension(format!("test function has dimension {d}, geometry {n}")));
            }
        }
        let roots = match (&geom, &f) {
            (Geometry::Torus { .. }, TestFunction::Fourier(t)) => t.iter().map(|t| t.freq.iter().map(|&k| (k * k) as f64).sum::<f64>().sqrt()).collect(),
            (Geometry::Gauss { .. }, TestFunction::Hermite(t)) => t.iter().map(|t| (t.degrees.iter().sum::<u32>() as f64).sqrt()).collect(),
            _ => return Err(Error::Unsupported(format!("no closed-form Poisson extension for this pairing on the {} geometry; supported: {SUPPORTED}", geom.name()))),
        };
        Ok(PoissonField { geom, f, roots })
    }

    pub fn geometry(&self) -> Geometry {
        self.geom
    }

    pub fn function(&self) -> &TestFunction {
        &self.f
    }

    /// Smallest nonzero `√λ` among the modes (the slowest vertical decay rate).
    pub fn min_rate(&self) -> Option<f64> {
        self.roots.iter().copied().filter(|r| *r > 0.0).fold(None, |a, r| Some(a.map_or(r, |a: f64| a.min(r))))
    }

    pub fn eval(&self, x: &[f64], y: f64) -> FieldValue {
        let n = x.len();
        let mut out = FieldValue { value: 0.0, grad_x: vec![0.0; n], d_y: 0.0 };
        self.accumulate(x, y, &mut out.grad_x, Some((&mut out.value, &mut out.d_y)));
        out
    }

    /// Writes `∇_x Q f(x, y)` into `grad`; the hot path of the estimator.
    pub fn grad_x_into(&self, x: &[f64], y: f64, grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.accumulate(x, y, grad, None);
    }

    fn accumulate(&self, x: &[f64], y: f64, grad: &mut [f64], mut rest: Option<(&mut f64, &mut f64)>) {
        match &self.f {
            TestFunction::Fourier(terms) => {
                for (t, &r) in terms.iter().zip(&self.roots) {
                    let e = (-y * r).exp();
                    let (s, c) = phase(&t.freq, x).sin_cos();
                    let val = t.cos * c + t.sin * s;
                    let der = -t.cos * s + t.sin * c;
                    for (g, &k) in grad.iter_mut().zip(&t.freq) {
                        *g += e * der * k as f64;
                    }
                    if let Some((v, dy)) = rest.as_mut() {
                        **v += e * val;
                        **dy += -r * e * val;
                    }
                }
            }
            TestFunction::Hermite(terms) => {
                for (t, &r) in terms.iter().zip(&self.roots) {
                    let e = t.coef * (-y * r).exp();
                    let n = x.len();
                    let mut vals = [0.0f64; 64];
                    for i in 0..n {
                        vals[i] = hermite(t.degrees[i], x[i]);
                    }
                    let prod: f64 = vals[..n].iter().product();
                    for i in 0..n {
                        let k = t.degrees[i];
                        if k == 0 {
                            continue;
                        }
                        let others: f64 = (0..n).filter(|&j| j != i).map(|j| vals[j]).product();
                        grad[i] += e * k as f64 * hermite(k - 1, x[i]) * others;
                    }
                    if let Some((v, dy)) = rest.as_mut() {
                        **v += e * prod;
                        **dy += -r * e * prod;
                    }
                }
            }
        }
    }
}

/// `R f = ∇(−Δ_φ)^{−1/2} f` mode by mode.
pub fn riesz_closed_form(f: &TestFunction, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    match f {
        TestFunction::Fourier(terms) => {
            for t in terms {
                let r = t.freq.iter().map(|&k| (k * k) as f64).sum::<f64>().sqrt();
                if r == 0.0 {
                    continue;
                }
                let (s, c) = phase(&t.freq, x).sin_cos();
                let der = -t.cos * s + t.sin * c;
                for (o, &k) in out.iter_mut().zip(&t.freq) {
                    *o += der * k as f64 / r;
                }
            }
        }
        TestFunction::Hermite(terms) => {
            for t in terms {
                let total: u32 = t.degrees.iter().sum();
                if total == 0 {
                    continue;
                }
                let r = (total as f64).sqrt();
                for i in 0..n {
                    let k = t.degrees[i];
                    if k == 0 {
                        continue;
                    }
                    let others: f64 = (0..n).filter(|&j| j != i).map(|j| hermite(t.degrees[j], x[j])).product();
                    out[i] += t.coef * k as f64 * hermite(k - 1, x[i]) * others / r;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(0, 0.7), 1.0);
        assert_eq!(hermite(1, 0.7), 0.7);
        assert!((hermite(2, 0.7) - (0.49 - 1.0)).abs() < 1e-15);
        assert!((hermite(3, 0.7) - (0.343 - 2.1)).abs() < 1e-15);
    }

    #[test]
    fn cos_extension() {
        let q = PoissonField::new(Geometry::Torus { n: 1 }, TestFunction::cos(1, 1), 0.0).unwrap();
        let v = q.eval(&[0.4], 1.3);
        assert!((v.value - (-1.3f64).exp() * 0.4f64.cos()).abs() < 1e-15);
        assert!((v.grad_x[0] + (-1.3f64).exp() * 0.4f64.sin()).abs() < 1e-15);
        assert!((v.d_y + v.value).abs() < 1e-15);
        assert_eq!(q.eval(&[0.4], 0.0).value, 0.4f64.cos());
    }

    #[test]
    fn he2_extension() {
        let q = PoissonField::new(Geometry::Gauss { n: 1 }, TestFunction::hermite(1, 2), 0.0).unwrap();
        let v = q.eval(&[1.5], 0.5);
        let e = (-0.5 * 2f64.sqrt()).exp();
        assert!((v.value - e * 1.25).abs() < 1e-15);
        assert!((v.grad_x[0] - e * 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatch() {
        assert!(matches!(PoissonField::new(Geometry::Gauss { n: 1 }, TestFunction::cos(1, 1), 0.0), Err(Error::Unsupported(_))));
        assert!(matches!(PoissonField::new(Geometry::Bessel { alpha: 1.0 }, TestFunction::hermite(1, 1), 0.0), Err(Error::Unsupported(_))));
        assert!(PoissonField::new(Geometry::Torus { n: 1 }, TestFunction::cos(1, 1), 1.0).is_err());
    }

    #[test]
    fn parse_modes() {
        let f = TestFunction::parse("cos + 0.5*sin2", 1).unwrap();
        assert!((f.value(&[0.3]) - (0.3f64.cos() + 0.5 * 0.6f64.sin())).abs() < 1e-15);
        assert_eq!(TestFunction::parse("he2", 2).unwrap(), TestFunction::hermite(2, 2));
        assert!(TestFunction::parse("cos+he2", 1).is_err());
        assert!(TestFunction::parse("tan", 1).is_err());
        assert!(TestFunction::parse("zero", 1).unwrap().is_zero());
    }

    #[test]
    fn closed_forms() {
        let r = riesz_closed_form(&TestFunction::cos(1, 1), &[0.9]);
        assert!((r[0] + 0.9f64.sin()).abs() < 1e-15);
        let r = riesz_closed_form(&TestFunction::hermite(1, 2), &[0.9]);
        assert!((r[0] - 2f64.sqrt() * 0.9).abs() < 1e-15);
    }
}

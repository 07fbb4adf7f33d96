//! Coupling data at a parameter point: `G`, `|Λ|`, `φ = arg G`, the pairing phase `β` and the
//! effective pairing strength `g = |G|·√|Λ|`.

use std::sync::Arc;

use num_complex::Complex;
use thiserror::Error;

use crate::exprlang::{self, Bindings, EvalError, Expr, ParseError};
use crate::scalar::{principal_arg, unwrap_near, Real};

pub const LAMBDA: &str = "lambda";
pub const OMEGA: &str = "omega";
pub const GAMMA: &str = "gamma";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CouplingError {
    #[error("parameter point has no `lambda` component")]
    MissingLambda,
    #[error("parameter `{0}` is not a finite real number")]
    NonFinite(String),
    #[error("parameter names {found:?} do not match the family schema {expected:?}")]
    SchemaMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("duplicate parameter `{0}`")]
    Duplicate(String),
    #[error("`i` is reserved for the imaginary unit and cannot name a parameter")]
    ReservedName,
    #[error("coupling expression: {0}")]
    Parse(#[from] ParseError),
    #[error("coupling evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("pairing phase β is undefined where g = |G|√|Λ| vanishes")]
    UndefinedBeta,
}

/// Ordered named real parameters; `lambda` is mandatory.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint<T: Real> {
    names: Arc<[String]>,
    values: Vec<T>,
}

impl<T: Real> ParamPoint<T> {
    pub fn new(names: &[&str], values: &[T]) -> Result<Self, CouplingError> {
        let names: Arc<[String]> = names.iter().map(|s| s.to_string()).collect();
        Self::from_parts(names, values.to_vec())
    }

    pub fn from_parts(names: Arc<[String]>, values: Vec<T>) -> Result<Self, CouplingError> {
        if names.len() != values.len() {
            return Err(CouplingError::SchemaMismatch {
                expected: names.to_vec(),
                found: vec![format!("{} values", values.len())],
            });
        }
        if !names.iter().any(|n| n == LAMBDA) {
            return Err(CouplingError::MissingLambda);
        }
        for (i, n) in names.iter().enumerate() {
            if n == "i" {
                return Err(CouplingError::ReservedName);
            }
            if names[..i].contains(n) {
                return Err(CouplingError::Duplicate(n.clone()));
            }
            if !values[i].is_finite() {
                return Err(CouplingError::NonFinite(n.clone()));
            }
        }
        Ok(Self { names, values })
    }

    /// The `{omega, gamma, lambda}` point of the built-in example family.
    pub fn cylinder(omega: T, gamma: T, lambda: T) -> Self {
        Self::new(&[OMEGA, GAMMA, LAMBDA], &[omega, gamma, lambda]).expect("finite coordinates")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn shared_names(&self) -> Arc<[String]> {
        self.names.clone()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<T> {
        self.index_of(name).map(|i| self.values[i])
    }

    pub fn lambda(&self) -> T {
        self.get(LAMBDA).expect("lambda checked at construction")
    }

    /// Distance from the λ axis, `√(ω² + γ²)`, when both components exist.
    pub fn rho(&self) -> Option<T> {
        Some(self.get(OMEGA)?.hypot(self.get(GAMMA)?))
    }

    /// Copy with component `index` replaced.
    pub fn with_index(&self, index: usize, value: T) -> Self {
        let mut values = self.values.clone();
        values[index] = value;
        Self {
            names: self.names.clone(),
            values,
        }
    }

    pub fn with(&self, name: &str, value: T) -> Option<Self> {
        Some(self.with_index(self.index_of(name)?, value))
    }

    pub fn bindings(&self) -> Bindings<T> {
        Bindings::from_real(self.names.iter().map(String::as_str).zip(self.values.iter().copied()))
    }
}

/// Where the coupling functions `G(ξ)` and `Λ(ξ)` come from.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingSpec {
    /// `|Λ| = 1`, `G = √(ω²+γ²)·e^{iλ}` over `{omega, gamma, lambda}`.
    PaperExample,
    /// `G = iγ`, `|Λ| = 1` over `{gamma, lambda}`: the pairing phase is constant.
    GammaConst,
    /// User expressions over a declared parameter list.
    Custom { g: Expr, lambda: Expr },
}

impl CouplingSpec {
    pub fn custom(g_text: &str, lambda_text: &str, params: &[&str]) -> Result<Self, CouplingError> {
        if !params.contains(&LAMBDA) {
            return Err(CouplingError::MissingLambda);
        }
        if params.contains(&"i") {
            return Err(CouplingError::ReservedName);
        }
        let g = exprlang::parse(g_text, params)?;
        let lambda = exprlang::parse(lambda_text, params)?;
        Ok(CouplingSpec::Custom { g, lambda })
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            CouplingSpec::PaperExample => vec![OMEGA.into(), GAMMA.into(), LAMBDA.into()],
            CouplingSpec::GammaConst => vec![GAMMA.into(), LAMBDA.into()],
            CouplingSpec::Custom { g, .. } => g.params().to_vec(),
        }
    }

    pub fn check_schema<T: Real>(&self, p: &ParamPoint<T>) -> Result<(), CouplingError> {
        let expected = self.param_names();
        if expected.as_slice() != p.names() {
            return Err(CouplingError::SchemaMismatch {
                expected,
                found: p.names().to_vec(),
            });
        }
        Ok(())
    }

    /// `(G, Λ)` at `p`, without schema checks.
    fn raw<T: Real>(&self, p: &ParamPoint<T>) -> Result<(Complex<T>, Complex<T>), CouplingError> {
        let one = Complex::new(T::one(), T::zero());
        Ok(match self {
            CouplingSpec::PaperExample => {
                let rho = p.rho().ok_or(CouplingError::MissingLambda)?;
                (Complex::from_polar(rho, p.lambda()), one)
            }
            CouplingSpec::GammaConst => {
                let gamma = p.get(GAMMA).ok_or(CouplingError::MissingLambda)?;
                (Complex::new(T::zero(), gamma), one)
            }
            CouplingSpec::Custom { g, lambda } => {
                let b = p.bindings();
                (g.eval(&b)?, lambda.eval(&b)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingValues<T: Real> {
    /// `G` itself.
    pub coupling: Complex<T>,
    pub abs_lambda: T,
    /// `arg G` in (−π, π]; zero when `G = 0`.
    pub phi: T,
    /// `−½ ln|Λ| + i(φ − π/2)`; `None` when `g = 0`.
    pub beta: Option<Complex<T>>,
    /// `|G|·√|Λ|`.
    pub g: T,
}

impl<T: Real> CouplingValues<T> {
    pub fn from_raw(coupling: Complex<T>, abs_lambda: T) -> Self {
        let g = coupling.norm() * abs_lambda.sqrt();
        let phi = if coupling.norm() > T::zero() {
            principal_arg(coupling)
        } else {
            T::zero()
        };
        let beta = (g > T::zero()).then(|| {
            Complex::new(-abs_lambda.ln() / T::lit(2.0), phi - T::FRAC_PI_2())
        });
        Self {
            coupling,
            abs_lambda,
            phi,
            beta,
            g,
        }
    }

    /// Values carrying only the effective strength, for the built-in family where the
    /// spectrum depends on `g = ρ` alone. `φ` is taken as `lambda`.
    pub fn cylinder(rho: T, lambda: T) -> Self {
        Self::from_raw(Complex::from_polar(rho, lambda), T::one())
    }

    pub fn beta(&self) -> Result<Complex<T>, CouplingError> {
        self.beta.ok_or(CouplingError::UndefinedBeta)
    }
}

pub fn eval_coupling<T: Real>(
    spec: &CouplingSpec,
    p: &ParamPoint<T>,
) -> Result<CouplingValues<T>, CouplingError> {
    spec.check_schema(p)?;
    let (coupling, lam) = spec.raw(p)?;
    Ok(CouplingValues::from_raw(coupling, lam.norm()))
}

/// `∂β/∂ξ_i` for every parameter, in schema order.
pub fn beta_partials<T: Real>(
    spec: &CouplingSpec,
    p: &ParamPoint<T>,
) -> Result<Vec<Complex<T>>, CouplingError> {
    let cv = eval_coupling(spec, p)?;
    cv.beta()?;
    let zero = Complex::new(T::zero(), T::zero());
    match spec {
        CouplingSpec::PaperExample => Ok(p
            .names()
            .iter()
            .map(|n| if n == LAMBDA { Complex::new(T::zero(), T::one()) } else { zero })
            .collect()),
        CouplingSpec::GammaConst => Ok(vec![zero; p.len()]),
        CouplingSpec::Custom { .. } => {
            let phi0 = cv.phi;
            let beta_at = |q: &ParamPoint<T>| -> Result<Complex<T>, CouplingError> {
                let (coupling, lam) = spec.raw(q)?;
                let cv = CouplingValues::from_raw(coupling, lam.norm());
                let b = cv.beta()?;
                // keep arg on the branch nearest the centre value
                Ok(Complex::new(b.re, unwrap_near(cv.phi, phi0) - T::FRAC_PI_2()))
            };
            (0..p.len())
                .map(|i| {
                    let x0 = p.values()[i];
                    let h = exprlang::default_step(x0);
                    exprlang::richardson(|x| beta_at(&p.with_index(i, x)), x0, h).map(|d| d.value)
                })
                .collect()
        }
    }
}

/// `∂g/∂ξ_i` for every parameter, in schema order.
pub fn g_partials<T: Real>(spec: &CouplingSpec, p: &ParamPoint<T>) -> Result<Vec<T>, CouplingError> {
    spec.check_schema(p)?;
    match spec {
        CouplingSpec::PaperExample => {
            let rho = p.rho().expect("schema checked");
            Ok(p
                .names()
                .iter()
                .map(|n| {
                    if rho == T::zero() || n == LAMBDA {
                        T::zero()
                    } else {
                        p.get(n).expect("own name") / rho
                    }
                })
                .collect())
        }
        CouplingSpec::GammaConst => Ok(p
            .names()
            .iter()
            .map(|n| {
                let gamma = p.get(GAMMA).expect("schema checked");
                if n == GAMMA && gamma != T::zero() {
                    gamma.signum()
                } else {
                    T::zero()
                }
            })
            .collect()),
        CouplingSpec::Custom { .. } => (0..p.len())
            .map(|i| {
                let x0 = p.values()[i];
                let h = exprlang::default_step(x0);
                exprlang::richardson(
                    |x| {
                        let (coupling, lam) = spec.raw(&p.with_index(i, x))?;
                        let g = coupling.norm() * lam.norm().sqrt();
                        Ok::<_, CouplingError>(Complex::new(g, T::zero()))
                    },
                    x0,
                    h,
                )
                .map(|d| d.value.re)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: Complex<f64>, b: Complex<f64>, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn paper_example_values() {
        let cv = eval_coupling(&CouplingSpec::PaperExample, &ParamPoint::<f64>::cylinder(0.0, 1.0, 2.0)).unwrap();
        assert!((cv.g - 1.0).abs() < 1e-15);
        assert!((cv.phi - 2.0).abs() < 1e-15);
        assert!(close(cv.beta.unwrap(), Complex::new(0.0, 2.0 - FRAC_PI_2), 1e-15));

        let cv = eval_coupling(&CouplingSpec::PaperExample, &ParamPoint::<f64>::cylinder(3.0, 4.0, 0.0)).unwrap();
        assert!((cv.g - 5.0).abs() < 1e-14);
        assert_eq!(cv.phi, 0.0);
        assert!(close(cv.beta.unwrap(), Complex::new(0.0, -FRAC_PI_2), 1e-15));
    }

    #[test]
    fn gamma_const_values() {
        for lambda in [-3.0, 0.0, 0.7, 5.0] {
            let p = ParamPoint::<f64>::new(&[GAMMA, LAMBDA], &[0.5, lambda]).unwrap();
            let cv = eval_coupling(&CouplingSpec::GammaConst, &p).unwrap();
            assert_eq!(cv.coupling, Complex::new(0.0, 0.5));
            assert!((cv.phi - FRAC_PI_2).abs() < 1e-15);
            assert!(cv.beta.unwrap().norm() < 1e-15);
            assert!(beta_partials(&CouplingSpec::GammaConst, &p)
                .unwrap()
                .iter()
                .all(|d| d.norm() == 0.0));
        }
    }

    #[test]
    fn vanishing_pairing_leaves_beta_undefined() {
        let cv = eval_coupling(&CouplingSpec::PaperExample, &ParamPoint::<f64>::cylinder(0.0, 0.0, 0.5)).unwrap();
        assert_eq!(cv.g, 0.0);
        assert!(cv.beta.is_none());
        assert_eq!(cv.beta(), Err(CouplingError::UndefinedBeta));
        let spec = CouplingSpec::custom("1", "0", &["lambda"]).unwrap();
        let cv = eval_coupling(&spec, &ParamPoint::<f64>::new(&["lambda"], &[1.0]).unwrap()).unwrap();
        assert_eq!(cv.g, 0.0);
    }

    #[test]
    fn beta_invariants() {
        let spec = CouplingSpec::custom("2*exp(i*lambda) + omega", "0.3 + i*omega", &["omega", "lambda"]).unwrap();
        for (omega, lambda) in [(0.1, 0.2), (-1.0, 3.0), (2.0, -2.5)] {
            let p = ParamPoint::<f64>::new(&["omega", "lambda"], &[omega, lambda]).unwrap();
            let cv = eval_coupling(&spec, &p).unwrap();
            let beta = cv.beta.unwrap();
            assert!((beta.re + 0.5 * cv.abs_lambda.ln()).abs() < 1e-14);
            let d = (beta.im - (cv.phi - FRAC_PI_2)).rem_euclid(2.0 * PI);
            assert!(d < 1e-14 || (2.0 * PI - d) < 1e-14);
            assert!(close(beta.exp() * (-beta).exp(), Complex::new(1.0, 0.0), 1e-14));
            assert!(cv.phi > -PI && cv.phi <= PI);
        }
    }

    #[test]
    fn closed_form_partials() {
        let p = ParamPoint::<f64>::cylinder(0.3, 1.0, 2.0);
        let d = beta_partials(&CouplingSpec::PaperExample, &p).unwrap();
        assert_eq!(d, vec![Complex::new(0.0, 0.0), Complex::new(0.0, 0.0), Complex::new(0.0, 1.0)]);
        let dg = g_partials(&CouplingSpec::PaperExample, &p).unwrap();
        let rho = 0.3f64.hypot(1.0);
        assert!((dg[0] - 0.3 / rho).abs() < 1e-15 && (dg[1] - 1.0 / rho).abs() < 1e-15 && dg[2] == 0.0);
    }

    #[test]
    fn numeric_partials_match_closed_form() {
        let spec = CouplingSpec::custom(
            "sqrt(omega^2+gamma^2)*exp(i*lambda)",
            "1",
            &["omega", "gamma", "lambda"],
        )
        .unwrap();
        let p = ParamPoint::<f64>::cylinder(0.0, 1.0, 2.0);
        let numeric = beta_partials(&spec, &p).unwrap();
        let exact = beta_partials(&CouplingSpec::PaperExample, &p).unwrap();
        for (a, b) in numeric.iter().zip(&exact) {
            assert!(close(*a, *b, 1e-7), "{a} vs {b}");
        }
        let gn = g_partials(&spec, &ParamPoint::<f64>::cylinder(0.4, 1.0, 2.0)).unwrap();
        let ge = g_partials(&CouplingSpec::PaperExample, &ParamPoint::<f64>::cylinder(0.4, 1.0, 2.0)).unwrap();
        for (a, b) in gn.iter().zip(&ge) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn partials_survive_the_branch_cut() {
        // arg G crosses ±π at lambda = π
        let spec = CouplingSpec::custom("exp(i*lambda)", "1", &["lambda"]).unwrap();
        let p = ParamPoint::<f64>::new(&["lambda"], &[PI]).unwrap();
        let d = beta_partials(&spec, &p).unwrap();
        assert!(close(d[0], Complex::new(0.0, 1.0), 1e-7), "{}", d[0]);
    }

    #[test]
    fn rescaling_preserves_g() {
        let a = CouplingSpec::custom("omega + i*lambda", "2", &["omega", "lambda"]).unwrap();
        let b = CouplingSpec::custom("3*(omega + i*lambda)", "2/9", &["omega", "lambda"]).unwrap();
        let p = ParamPoint::<f64>::new(&["omega", "lambda"], &[0.4, 1.3]).unwrap();
        let ga = eval_coupling(&a, &p).unwrap().g;
        let gb = eval_coupling(&b, &p).unwrap().g;
        assert!((ga - gb).abs() < 1e-14);
    }

    #[test]
    fn phi_is_continuous_along_a_path() {
        let spec = CouplingSpec::custom("exp(i*3*lambda)*(1+omega)", "1", &["omega", "lambda"]).unwrap();
        let at = |lambda: f64| {
            let p = ParamPoint::<f64>::new(&["omega", "lambda"], &[0.2, lambda]).unwrap();
            eval_coupling(&spec, &p).unwrap().phi
        };
        let start = at(-4.0);
        let mut prev = start;
        for s in 1..=400 {
            let next = unwrap_near(at(-4.0 + 8.0 * s as f64 / 400.0), prev);
            assert!((next - prev).abs() < PI);
            prev = next;
        }
        assert!((prev - start - 24.0).abs() < 1e-9);
    }

    #[test]
    fn schema_is_enforced() {
        let p = ParamPoint::<f64>::new(&["lambda"], &[1.0]).unwrap();
        assert!(matches!(
            eval_coupling(&CouplingSpec::PaperExample, &p),
            Err(CouplingError::SchemaMismatch { .. })
        ));
        assert_eq!(ParamPoint::<f64>::new(&["omega"], &[1.0]).unwrap_err(), CouplingError::MissingLambda);
        assert!(matches!(
            ParamPoint::<f64>::new(&["lambda"], &[f64::NAN]),
            Err(CouplingError::NonFinite(_))
        ));
        assert_eq!(
            CouplingSpec::custom("1", "1", &["i", "lambda"]).unwrap_err(),
            CouplingError::ReservedName
        );
    }
}

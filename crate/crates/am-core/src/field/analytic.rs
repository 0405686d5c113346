//! Closed-form fields with hand-written jets.
//!
//! These carry no parameters; the differentiable-field implementation is a
//! no-op gradient so every objective estimator accepts them.

use super::{
    check_point, ActionField, DifferentiableField, FieldError, FieldJet, JetRequest,
    PointCotangents, PointEval,
};

type TimeFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// `s(t, x) ≡ c`.
pub struct ConstantField {
    dim: usize,
    c: f64,
}

impl ConstantField {
    pub fn new(dim: usize, c: f64) -> Self {
        ConstantField { dim, c }
    }
}

/// `s(t, x) = a · x`.
pub struct LinearField {
    a: Vec<f64>,
}

impl LinearField {
    pub fn new(a: Vec<f64>) -> Self {
        LinearField { a }
    }
}

/// `s(t, x) = ½ a(t) ‖x‖²`.
pub struct QuadraticRadialField {
    dim: usize,
    a: TimeFn,
    da_dt: TimeFn,
}

impl QuadraticRadialField {
    pub fn new(
        dim: usize,
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
        da_dt: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        QuadraticRadialField { dim, a: Box::new(a), da_dt: Box::new(da_dt) }
    }

    /// Time-independent coefficient.
    pub fn constant(dim: usize, a: f64) -> Self {
        Self::new(dim, move |_| a, |_| 0.0)
    }
}

/// True action of a single-Gaussian path `q_t = N(f(t), σ(t)² I)`:
///
/// `s*(t, x) = ½ L'(t) ‖x − f(t)‖² + ⟨f'(t), x⟩`,  `L(t) = log σ(t)`,
///
/// whose spatial gradient is the path velocity
/// `(x − f(t)) L'(t) + f'(t)`.
pub struct GaussianTrueAction {
    mean: Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    dmean: Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    d2mean: Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    dlog_sigma: TimeFn,
    d2log_sigma: TimeFn,
    dim: usize,
}

impl GaussianTrueAction {
    pub fn new(
        dim: usize,
        mean: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        dmean: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        d2mean: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        dlog_sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2log_sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        GaussianTrueAction {
            mean: Box::new(mean),
            dmean: Box::new(dmean),
            d2mean: Box::new(d2mean),
            dlog_sigma: Box::new(dlog_sigma),
            d2log_sigma: Box::new(d2log_sigma),
            dim,
        }
    }

    /// Pure translation `f(t) = t·u`, constant scale: `s* = u·x`.
    pub fn translation(u: Vec<f64>) -> Self {
        let d = u.len();
        let u2 = u.clone();
        let z = vec![0.0; d];
        let z2 = z.clone();
        Self::new(
            d,
            move |t| u.iter().map(|ui| ui * t).collect(),
            move |_| u2.clone(),
            move |_| z2.clone(),
            |_| 0.0,
            |_| 0.0,
        )
    }
}

macro_rules! impl_zero_param_diff {
    ($ty:ty) => {
        impl DifferentiableField for $ty {
            type Workspace = ();

            fn workspace(&self) -> Self::Workspace {}

            fn param_len(&self) -> usize {
                0
            }

            fn eval_with(
                &self,
                _ws: &mut Self::Workspace,
                t: f64,
                x: &[f64],
                request: &JetRequest,
            ) -> Result<PointEval, FieldError> {
                self.eval_closed_form(t, x, request)
            }

            fn accumulate_param_grad(
                &self,
                _ws: &mut Self::Workspace,
                _cot: &PointCotangents,
                _grad: &mut [f64],
            ) {
            }
        }
    };
}

impl ConstantField {
    fn eval_closed_form(
        &self,
        t: f64,
        x: &[f64],
        request: &JetRequest,
    ) -> Result<PointEval, FieldError> {
        check_point(self.dim, t, x)?;
        Ok(PointEval {
            value: self.c,
            grad: vec![0.0; self.dim + 1],
            laplacian: request.laplacian.then_some(0.0),
            dir_second: vec![0.0; request.second_dirs.len()],
        })
    }
}

impl ActionField for ConstantField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, t: f64, x: &[f64]) -> Result<FieldJet, FieldError> {
        check_point(self.dim, t, x)?;
        Ok(FieldJet {
            value: self.c,
            spatial_grad: vec![0.0; self.dim],
            time_deriv: 0.0,
            laplacian: 0.0,
        })
    }
}

impl_zero_param_diff!(ConstantField);

impl LinearField {
    fn eval_closed_form(
        &self,
        t: f64,
        x: &[f64],
        request: &JetRequest,
    ) -> Result<PointEval, FieldError> {
        check_point(self.a.len(), t, x)?;
        let mut grad = self.a.clone();
        grad.push(0.0);
        Ok(PointEval {
            value: dot(&self.a, x),
            grad,
            laplacian: request.laplacian.then_some(0.0),
            dir_second: vec![0.0; request.second_dirs.len()],
        })
    }
}

impl ActionField for LinearField {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn jet(&self, t: f64, x: &[f64]) -> Result<FieldJet, FieldError> {
        check_point(self.a.len(), t, x)?;
        Ok(FieldJet {
            value: dot(&self.a, x),
            spatial_grad: self.a.clone(),
            time_deriv: 0.0,
            laplacian: 0.0,
        })
    }
}

impl_zero_param_diff!(LinearField);

impl QuadraticRadialField {
    fn eval_closed_form(
        &self,
        t: f64,
        x: &[f64],
        request: &JetRequest,
    ) -> Result<PointEval, FieldError> {
        check_point(self.dim, t, x)?;
        let a = (self.a)(t);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let mut grad: Vec<f64> = x.iter().map(|v| a * v).collect();
        grad.push(0.5 * (self.da_dt)(t) * r2);
        Ok(PointEval {
            value: 0.5 * a * r2,
            grad,
            laplacian: request.laplacian.then_some(a * self.dim as f64),
            dir_second: request
                .second_dirs
                .iter()
                .map(|v| a * v.iter().map(|vi| vi * vi).sum::<f64>())
                .collect(),
        })
    }
}

impl ActionField for QuadraticRadialField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, t: f64, x: &[f64]) -> Result<FieldJet, FieldError> {
        check_point(self.dim, t, x)?;
        let a = (self.a)(t);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Ok(FieldJet {
            value: 0.5 * a * r2,
            spatial_grad: x.iter().map(|v| a * v).collect(),
            time_deriv: 0.5 * (self.da_dt)(t) * r2,
            laplacian: a * self.dim as f64,
        })
    }
}

impl_zero_param_diff!(QuadraticRadialField);

impl GaussianTrueAction {
    fn eval_closed_form(
        &self,
        t: f64,
        x: &[f64],
        request: &JetRequest,
    ) -> Result<PointEval, FieldError> {
        let jet = self.jet(t, x)?;
        let lp = (self.dlog_sigma)(t);
        let mut grad = jet.spatial_grad;
        grad.push(jet.time_deriv);
        Ok(PointEval {
            value: jet.value,
            grad,
            laplacian: request.laplacian.then_some(jet.laplacian),
            dir_second: request
                .second_dirs
                .iter()
                .map(|v| lp * v.iter().map(|vi| vi * vi).sum::<f64>())
                .collect(),
        })
    }
}

impl ActionField for GaussianTrueAction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, t: f64, x: &[f64]) -> Result<FieldJet, FieldError> {
        check_point(self.dim, t, x)?;
        let f = (self.mean)(t);
        let df = (self.dmean)(t);
        let d2f = (self.d2mean)(t);
        let lp = (self.dlog_sigma)(t);
        let lpp = (self.d2log_sigma)(t);
        let mut r2 = 0.0;
        let mut df_dot_r = 0.0;
        let mut d2f_dot_x = 0.0;
        let mut grad = vec![0.0; self.dim];
        for i in 0..self.dim {
            let r = x[i] - f[i];
            r2 += r * r;
            df_dot_r += df[i] * r;
            d2f_dot_x += d2f[i] * x[i];
            grad[i] = r * lp + df[i];
        }
        Ok(FieldJet {
            value: 0.5 * lp * r2 + dot(&df, x),
            spatial_grad: grad,
            // d/dt [½L'‖x−f‖² + f'·x] = ½L''‖x−f‖² − L'⟨f', x−f⟩ + f''·x
            time_deriv: 0.5 * lpp * r2 - lp * df_dot_r + d2f_dot_x,
            laplacian: lp * self.dim as f64,
        })
    }
}

impl_zero_param_diff!(GaussianTrueAction);

/// Adds a constant to another field's value; all derivatives pass through.
pub struct Shifted<F> {
    pub inner: F,
    pub offset: f64,
}

impl<F: ActionField> ActionField for Shifted<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn jet(&self, t: f64, x: &[f64]) -> Result<FieldJet, FieldError> {
        let mut jet = self.inner.jet(t, x)?;
        jet.value += self.offset;
        Ok(jet)
    }
}

impl<F: DifferentiableField> DifferentiableField for Shifted<F> {
    type Workspace = F::Workspace;

    fn workspace(&self) -> Self::Workspace {
        self.inner.workspace()
    }

    fn param_len(&self) -> usize {
        self.inner.param_len()
    }

    fn eval_with(
        &self,
        ws: &mut Self::Workspace,
        t: f64,
        x: &[f64],
        request: &JetRequest,
    ) -> Result<PointEval, FieldError> {
        let mut eval = self.inner.eval_with(ws, t, x, request)?;
        eval.value += self.offset;
        Ok(eval)
    }

    fn accumulate_param_grad(
        &self,
        ws: &mut Self::Workspace,
        cot: &PointCotangents,
        grad: &mut [f64],
    ) {
        self.inner.accumulate_param_grad(ws, cot, grad);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_jet_matches_hand_values() {
        // s(t,x) = ½(1+t)‖x‖², d=2, at (t=0, x=(3,4)).
        let f = QuadraticRadialField::new(2, |t| 1.0 + t, |_| 1.0);
        let jet = f.jet(0.0, &[3.0, 4.0]).unwrap();
        assert_eq!(jet.value, 12.5);
        assert_eq!(jet.spatial_grad, vec![3.0, 4.0]);
        assert_eq!(jet.time_deriv, 12.5);
        assert_eq!(jet.laplacian, 2.0);
    }

    #[test]
    fn constant_jet_is_flat() {
        let f = ConstantField::new(3, 4.25);
        let jet = f.jet(0.7, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(jet.value, 4.25);
        assert_eq!(jet.spatial_grad, vec![0.0; 3]);
        assert_eq!(jet.time_deriv, 0.0);
        assert_eq!(jet.laplacian, 0.0);
    }

    #[test]
    fn shift_changes_only_value() {
        let base = QuadraticRadialField::new(2, |t| 1.0 + t, |_| 1.0);
        let shifted = Shifted { inner: QuadraticRadialField::new(2, |t| 1.0 + t, |_| 1.0), offset: 3.5 };
        let a = base.jet(0.3, &[1.0, 2.0]).unwrap();
        let b = shifted.jet(0.3, &[1.0, 2.0]).unwrap();
        assert_eq!(b.value, a.value + 3.5);
        assert_eq!(b.spatial_grad, a.spatial_grad);
        assert_eq!(b.time_deriv, a.time_deriv);
        assert_eq!(b.laplacian, a.laplacian);
    }

    #[test]
    fn dimension_and_finiteness_checks() {
        let f = LinearField::new(vec![1.0, 0.0]);
        assert!(matches!(
            f.jet(0.0, &[1.0]),
            Err(FieldError::DimMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(f.jet(f64::NAN, &[1.0, 2.0]), Err(FieldError::NonFiniteInput)));
        assert!(matches!(
            f.jet(0.0, &[f64::INFINITY, 0.0]),
            Err(FieldError::NonFiniteInput)
        ));
    }

    #[test]
    fn translation_action_gradient_is_velocity() {
        let f = GaussianTrueAction::translation(vec![2.0, 2.0]);
        let jet = f.jet(0.4, &[0.3, -1.0]).unwrap();
        assert_eq!(jet.spatial_grad, vec![2.0, 2.0]);
        assert_eq!(jet.laplacian, 0.0);
        assert_eq!(jet.time_deriv, 0.0);
    }
}

use crate::scalar::Real;

/// Smooth test functions `φ(x, y)` of features and labels.
#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction<R> {
    Constant(R),
    /// `w·x + v·y`.
    Linear { w: Vec<R>, v: Vec<R> },
    /// `½|x − y|²`.
    Quadratic,
    /// `sin(ω·x + θ)`.
    Sine { omega: Vec<R>, phase: R },
    /// `exp(−|x − c|² / (2s²))`.
    Gaussian { centre: Vec<R>, width: R },
}

impl<R: Real> TestFunction<R> {
    pub fn value(&self, x: &[R], y: &[R]) -> R {
        match self {
            TestFunction::Constant(c) => *c,
            TestFunction::Linear { w, v } => dot(w, x) + dot(v, y),
            TestFunction::Quadratic => {
                R::lit(0.5) * x.iter().zip(y).fold(R::zero(), |s, (&a, &b)| s + (a - b) * (a - b))
            }
            TestFunction::Sine { omega, phase } => (dot(omega, x) + *phase).sin(),
            TestFunction::Gaussian { centre, width } => {
                let r2 = x.iter().zip(centre).fold(R::zero(), |s, (&a, &c)| s + (a - c) * (a - c));
                (-r2 / (R::lit(2.0) * *width * *width)).exp()
            }
        }
    }

    pub fn grad_x(&self, x: &[R], y: &[R], out: &mut [R]) {
        match self {
            TestFunction::Constant(_) => out.iter_mut().for_each(|v| *v = R::zero()),
            TestFunction::Linear { w, .. } => out.copy_from_slice(w),
            TestFunction::Quadratic => {
                for (o, (&a, &b)) in out.iter_mut().zip(x.iter().zip(y)) {
                    *o = a - b;
                }
            }
            TestFunction::Sine { omega, phase } => {
                let c = (dot(omega, x) + *phase).cos();
                for (o, &w) in out.iter_mut().zip(omega) {
                    *o = c * w;
                }
            }
            TestFunction::Gaussian { centre, width } => {
                let g = self.value(x, y);
                let s2 = *width * *width;
                for (o, (&a, &c)) in out.iter_mut().zip(x.iter().zip(centre)) {
                    *o = -g * (a - c) / s2;
                }
            }
        }
    }
}

fn dot<R: Real>(u: &[R], v: &[R]) -> R {
    u.iter().zip(v).fold(R::zero(), |s, (&a, &b)| s + a * b)
}

/// First-order forward-mode number `re + eps * e`, with `e^2 = 0`.
///
/// `T` is anything implementing [`Array`](crate::autodiff::Array), including
/// another `Dual`: `Dual<Dual<T>>` carries the mixed second derivative in
/// `eps.eps`. A `None` tangent is a structural zero and skips work.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: Option<T>,
}

impl<T> Dual<T> {
    pub fn new(re: T, eps: Option<T>) -> Self {
        Dual { re, eps }
    }

    pub fn constant(re: T) -> Self {
        Dual { re, eps: None }
    }

    pub fn variable(re: T, tangent: T) -> Self {
        Dual {
            re,
            eps: Some(tangent),
        }
    }
}

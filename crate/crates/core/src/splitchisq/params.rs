use crate::error::{Error, Result};

/// Parameters `(d, p, m0, δ)` of the noncentral split chi-square family.
///
/// `d` is the dimension of the parameter space, `p = d − k` the number of
/// constrained coordinates, `m0` the fraction of data used for evaluation and
/// `δ = hᵀh` the noncentrality of a direction `h ∈ ℝᵖ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChiSqParams {
    d: usize,
    p: usize,
    m0: f64,
    delta: f64,
}

impl SplitChiSqParams {
    pub fn new(d: usize, p: usize, m0: f64, delta: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be positive"));
        }
        if p > d {
            return Err(Error::invalid("p", format!("p = {p} exceeds d = {d}")));
        }
        if !(m0 > 0.0 && m0 < 1.0) {
            return Err(Error::invalid("m0", format!("{m0} is outside (0, 1)")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::invalid(
                "delta",
                format!("{delta} is not a finite nonnegative value"),
            ));
        }
        if p == 0 && delta > 0.0 {
            return Err(Error::invalid(
                "delta",
                "a positive noncentrality needs p >= 1",
            ));
        }
        Ok(Self { d, p, m0, delta })
    }

    /// Central member (`δ = 0`), the null limit of the split statistic.
    pub fn central(d: usize, p: usize, m0: f64) -> Result<Self> {
        Self::new(d, p, m0, 0.0)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Dimension of the null hypothesis, `d − p`.
    pub fn k(&self) -> usize {
        self.d - self.p
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn m1(&self) -> f64 {
        1.0 - self.m0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `m0 / m1`.
    pub fn odds(&self) -> f64 {
        self.m0 / (1.0 - self.m0)
    }

    pub fn with_m0(&self, m0: f64) -> Result<Self> {
        Self::new(self.d, self.p, m0, self.delta)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.d, self.p, self.m0, delta)
    }
}

/// Which limit law is meant: the plain split statistic or the weighted
/// combination `w0·Λ + (1 − w0)·Λ_swap` of the split and role-swapped
/// statistics computed on the same split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitVariant {
    Split,
    CrossFit { w0: f64 },
}

impl LimitVariant {
    /// The averaged cross-fit statistic, `w0 = 1/2`.
    pub const EVEN_CROSSFIT: LimitVariant = LimitVariant::CrossFit { w0: 0.5 };

    pub fn crossfit(w0: f64) -> Result<Self> {
        let v = LimitVariant::CrossFit { w0 };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LimitVariant::Split => Ok(()),
            LimitVariant::CrossFit { w0 } if (0.0..=1.0).contains(&w0) => Ok(()),
            LimitVariant::CrossFit { w0 } => Err(Error::invalid(
                "w0",
                format!("weight {w0} is outside [0, 1]"),
            )),
        }
    }
}

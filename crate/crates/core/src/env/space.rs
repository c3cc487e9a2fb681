use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finder::TUNED_PARAMS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl ParamBounds {
    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Named box of tunable parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParamBounds>", into = "Vec<ParamBounds>")]
pub struct ParamSpace {
    params: Vec<ParamBounds>,
}

impl Default for ParamSpace {
    fn default() -> Self {
        let bounds = [(3.5, 4.0), (0.0, 0.6), (0.1, 0.7), (0.0, 2.0)];
        Self {
            params: TUNED_PARAMS
                .iter()
                .zip(bounds)
                .map(|(n, (lower, upper))| ParamBounds { name: n.to_string(), lower, upper })
                .collect(),
        }
    }
}

impl TryFrom<Vec<ParamBounds>> for ParamSpace {
    type Error = Error;

    fn try_from(params: Vec<ParamBounds>) -> Result<Self> {
        Self::new(params)
    }
}

impl From<ParamSpace> for Vec<ParamBounds> {
    fn from(s: ParamSpace) -> Self {
        s.params
    }
}

impl ParamSpace {
    pub fn new(params: Vec<ParamBounds>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Config("parameter space is empty".into()));
        }
        for (i, p) in params.iter().enumerate() {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(Error::Config(format!("parameter '{}' needs finite lower < upper", p.name)));
            }
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::Config(format!("duplicate parameter '{}'", p.name)));
            }
        }
        Ok(Self { params })
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn bounds(&self) -> &[ParamBounds] {
        &self.params
    }

    pub fn names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::Shape(format!("expected {} parameters, got {n}", self.dim())));
        }
        Ok(())
    }

    /// Clamp `values` into the box.
    pub fn vector(&self, values: &[f64]) -> Result<ParamVector> {
        self.check_len(values.len())?;
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Usage("parameter values must not be NaN".into()));
        }
        Ok(ParamVector(values.iter().zip(&self.params).map(|(v, b)| v.clamp(b.lower, b.upper)).collect()))
    }

    pub fn sample(&self, rng: &mut impl Rng) -> ParamVector {
        ParamVector(self.params.iter().map(|b| rng.random_range(b.lower..=b.upper)).collect())
    }

    /// Map each component onto `[0, 1]`.
    pub fn normalize(&self, p: &ParamVector) -> Vec<f64> {
        p.0.iter().zip(&self.params).map(|(v, b)| (v - b.lower) / b.range()).collect()
    }

    pub fn denormalize(&self, unit: &[f64]) -> Result<ParamVector> {
        self.check_len(unit.len())?;
        let raw: Vec<f64> = unit.iter().zip(&self.params).map(|(u, b)| b.lower + u * b.range()).collect();
        self.vector(&raw)
    }

    /// Move each parameter by `action_i * delta * range_i`, clamped.
    pub fn apply_action(&self, params: &ParamVector, action: &[f64], delta: f64) -> Result<ParamVector> {
        self.check_len(action.len())?;
        self.check_len(params.len())?;
        let moved: Vec<f64> = params
            .0
            .iter()
            .zip(action)
            .zip(&self.params)
            .map(|((p, a), b)| p + a * delta * b.range())
            .collect();
        self.vector(&moved)
    }
}

/// Parameter values inside a [`ParamSpace`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The Team-SoFiA setting of the four finder parameters.
pub fn benchmark_values() -> [f64; 4] {
    [3.8, 0.1, 0.3, 1.5]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bounds() {
        let s = ParamSpace::default();
        assert_eq!(s.names(), TUNED_PARAMS.to_vec());
        let b: Vec<_> = s.bounds().iter().map(|b| (b.lower, b.upper)).collect();
        assert_eq!(b, vec![(3.5, 4.0), (0.0, 0.6), (0.1, 0.7), (0.0, 2.0)]);
    }

    #[test]
    fn apply_action_examples() {
        let s = ParamSpace::default();
        let p = s.vector(&benchmark_values()).unwrap();
        assert_eq!(s.apply_action(&p, &[0.0; 4], 0.1).unwrap(), p);
        let top = s.vector(&[4.0, 0.1, 0.3, 1.5]).unwrap();
        assert_eq!(s.apply_action(&top, &[1.0, 0.0, 0.0, 0.0], 0.1).unwrap().values()[0], 4.0);
        let q = s.vector(&[3.7, 0.1, 0.3, 1.5]).unwrap();
        let moved = s.apply_action(&q, &[-0.5, 0.0, 0.0, 0.0], 0.1).unwrap();
        assert!((moved.values()[0] - 3.675).abs() < 1e-12);
    }

    #[test]
    fn construction_clamps() {
        let s = ParamSpace::default();
        assert_eq!(s.vector(&[9.0, -1.0, 0.3, 1.0]).unwrap().values(), &[4.0, 0.0, 0.3, 1.0]);
        assert!(s.vector(&[1.0]).is_err());
    }

    #[test]
    fn invalid_spaces() {
        let b = |n: &str, l, u| ParamBounds { name: n.into(), lower: l, upper: u };
        assert!(ParamSpace::new(vec![b("a", 1.0, 1.0)]).is_err());
        assert!(ParamSpace::new(vec![b("a", 0.0, 1.0), b("a", 0.0, 2.0)]).is_err());
        let json = r#"[{"name": "a", "lower": 2, "upper": 1}]"#;
        assert!(serde_json::from_str::<ParamSpace>(json).is_err());
    }

    #[test]
    fn normalize_round_trip() {
        let s = ParamSpace::default();
        let p = s.vector(&[3.6, 0.3, 0.5, 0.4]).unwrap();
        let u = s.normalize(&p);
        assert!(u.iter().all(|v| (0.0..=1.0).contains(v)));
        let back = s.denormalize(&u).unwrap();
        for (a, b) in back.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

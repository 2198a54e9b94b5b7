//! State spaces: ℝⁿ, the circle and the flat torus. Integration runs on the
//! universal cover (unwrapped angles); wrapping happens only for distances and
//! reporting.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Space {
    Euclidean { dim: usize },
    Circle,
    Torus2,
}

impl Space {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("euclidean dimension must be at least 1".into()));
        }
        Ok(Space::Euclidean { dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            Space::Euclidean { dim } => *dim,
            Space::Circle => 1,
            Space::Torus2 => 2,
        }
    }

    /// Whether coordinates are angles (circle, torus).
    pub fn is_angular(&self) -> bool {
        !matches!(self, Space::Euclidean { .. })
    }

    pub fn label(&self) -> String {
        match self {
            Space::Euclidean { dim } => format!("R^{dim}"),
            Space::Circle => "S^1".into(),
            Space::Torus2 => "T^2".into(),
        }
    }

    /// Projects cover coordinates to the canonical representative.
    pub fn canonical(&self, coords: &[f64]) -> Vec<f64> {
        if self.is_angular() {
            coords.iter().map(|&a| wrap(a)).collect()
        } else {
            coords.to_vec()
        }
    }

    /// Distance between two coordinate vectors; angular coordinates may be
    /// given on the cover.
    pub fn dist(&self, p: &[f64], q: &[f64]) -> f64 {
        debug_assert_eq!(p.len(), q.len());
        let sq: f64 = if self.is_angular() {
            p.iter().zip(q).map(|(a, b)| arc(*a, *b).powi(2)).sum()
        } else {
            p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum()
        };
        sq.sqrt()
    }

    fn check(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.dim() {
            return Err(Error::Usage(format!(
                "{} needs {} coordinates, got {}",
                self.label(),
                self.dim(),
                coords.len()
            )));
        }
        Ok(())
    }
}

/// A point in canonical coordinates: angles in (-π, π].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub space: Space,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(space: Space, coords: Vec<f64>) -> Result<Self> {
        space.check(&coords)?;
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Input("point coordinates must be finite".into()));
        }
        let coords = space.canonical(&coords);
        Ok(Self { space, coords })
    }

    pub fn angle(alpha: f64) -> Self {
        Self { space: Space::Circle, coords: vec![wrap(alpha)] }
    }

    pub fn torus(alpha: f64, beta: f64) -> Self {
        Self { space: Space::Torus2, coords: vec![wrap(alpha), wrap(beta)] }
    }
}

/// A tangent vector in angle/ambient coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub base: Point,
    pub components: Vec<f64>,
}

impl Tangent {
    pub fn new(base: Point, components: Vec<f64>) -> Result<Self> {
        base.space.check(&components)?;
        Ok(Self { base, components })
    }

    /// Norm in the flat metric.
    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Maps an angle into (-π, π].
pub fn wrap(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let r = angle.rem_euclid(TWO_PI);
    if r > PI {
        r - TWO_PI
    } else {
        r
    }
}

/// Arc distance between two angles, in [0, π].
pub fn arc(a: f64, b: f64) -> f64 {
    wrap(a - b).abs()
}

pub fn distance(space: Space, p: &Point, q: &Point) -> Result<f64> {
    if p.space != space || q.space != space {
        return Err(Error::Usage(format!(
            "distance on {} between points of {} and {}",
            space.label(),
            p.space.label(),
            q.space.label()
        )));
    }
    Ok(space.dist(&p.coords, &q.coords))
}

/// Continuous unwinding of a sampled angle sequence.
pub fn lift(path: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(path.len());
    let Some(&first) = path.first() else {
        return Ok(out);
    };
    out.push(wrap(first));
    for (k, w) in path.windows(2).enumerate() {
        let step = wrap(w[1] - w[0]);
        if step.abs() >= PI {
            return Err(Error::Sampling { index: k + 1, step });
        }
        let prev = out[k];
        out.push(prev + step);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wrap_convention() {
        assert!((wrap(3.0 * PI) - PI).abs() < 1e-12);
        assert_eq!(wrap(-PI), PI);
        assert_eq!(wrap(PI), PI);
        assert_eq!(wrap(0.5), 0.5);
        assert!((wrap(-3.5) - (-3.5 + TWO_PI)).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        let d = distance(Space::Circle, &Point::angle(0.0), &Point::angle(PI / 2.0)).unwrap();
        assert!((d - PI / 2.0).abs() < 1e-15);
        let d = distance(Space::Circle, &Point::angle(PI - 0.1), &Point::angle(-PI + 0.1)).unwrap();
        assert!((d - 0.2).abs() < 1e-12);
        let d = distance(Space::Torus2, &Point::torus(0.0, 0.0), &Point::torus(PI / 2.0, PI / 2.0)).unwrap();
        let direct = ((PI / 2.0).powi(2) + (PI / 2.0).powi(2)).sqrt();
        assert!((d - direct).abs() < 1e-15);
        assert!((d - PI / 2f64.sqrt()).abs() < 1e-14);
        let r2 = Space::euclidean(2).unwrap();
        let d = distance(r2, &Point::new(r2, vec![0.0, 0.0]).unwrap(), &Point::new(r2, vec![3.0, 4.0]).unwrap());
        assert_eq!(d.unwrap(), 5.0);
    }

    #[test]
    fn mismatched_spaces_are_usage_errors() {
        let err = distance(Space::Circle, &Point::angle(0.0), &Point::torus(0.0, 0.0));
        assert!(matches!(err, Err(Error::Usage(_))));
        assert!(matches!(Point::new(Space::Torus2, vec![1.0]), Err(Error::Usage(_))));
        assert!(Space::euclidean(0).is_err());
    }

    #[test]
    fn lift_examples() {
        let l = lift(&[0.1, 3.0, -3.0]).unwrap();
        // nearest unwinding: -3.0 + 2π
        let oracle = [0.1, 3.0, -3.0 + TWO_PI];
        for (a, b) in l.iter().zip(oracle) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(lift(&[0.0, PI]), Err(Error::Sampling { index: 1, .. })));
        assert!(lift(&[]).unwrap().is_empty());
    }

    #[test]
    fn metric_axioms_by_fuzzing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spaces = [Space::Euclidean { dim: 3 }, Space::Circle, Space::Torus2];
        for space in spaces {
            for _ in 0..1000 {
                let mut draw = || -> Vec<f64> { (0..space.dim()).map(|_| rng.gen_range(-10.0..10.0)).collect() };
                let (p, q, r) = (draw(), draw(), draw());
                let (pq, qr, pr) = (space.dist(&p, &q), space.dist(&q, &r), space.dist(&p, &r));
                assert!(pr <= pq + qr + 1e-12);
                assert!((pq - space.dist(&q, &p)).abs() < 1e-12);
                assert!(space.dist(&p, &p) < 1e-12);
            }
        }
    }

    #[test]
    fn circle_distance_is_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let (a, b, c): (f64, f64, f64) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            let d0 = distance(Space::Circle, &Point::angle(a), &Point::angle(b)).unwrap();
            let d1 = distance(Space::Circle, &Point::angle(a + c), &Point::angle(b + c)).unwrap();
            assert!((d0 - d1).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn wrap_after_lift_is_wrap(steps in proptest::collection::vec(-3.0f64..3.0, 1..50), start in -10.0f64..10.0) {
            let mut path = vec![start];
            for s in steps {
                let last = *path.last().unwrap();
                path.push(wrap(last + s));
            }
            let l = lift(&path).unwrap();
            prop_assert_eq!(l[0], wrap(path[0]));
            for (a, b) in l.iter().zip(&path) {
                prop_assert!(arc(*a, *b) < 1e-9);
            }
        }

        #[test]
        fn wrap_is_periodic_and_in_range(x in -1e3f64..1e3) {
            let w = wrap(x);
            prop_assert!(w > -PI && w <= PI);
            prop_assert!(arc(w, x + TWO_PI) < 1e-9);
        }
    }
}

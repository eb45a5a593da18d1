use thiserror::Error;

use crate::geometry::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("direction needs at least two distinct points, got {distinct}")]
pub struct DegeneratePoints {
    pub distinct: usize,
}

const AXIS_ZERO: f64 = 1e-12;

/// Principal axis of a point cloud by orthogonal (total least squares)
/// regression.
///
/// Unlike regressing y on x, this treats both coordinates alike and stays
/// well-defined for north-south roads. The sign is normalized so the first
/// non-zero component is positive.
pub fn estimate_direction(points: &[Vec2]) -> Result<Vec2, DegeneratePoints> {
    let first = points.first().copied();
    let spread = first.is_some_and(|p0| points.iter().any(|&p| p != p0));
    if !spread {
        return Err(DegeneratePoints {
            distinct: usize::from(first.is_some()),
        });
    }

    let n = points.len() as f64;
    let mean = points.iter().fold(Vec2::ZERO, |acc, &p| acc + p) * (1.0 / n);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &p in points {
        let d = p - mean;
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    // eigenvector of the larger eigenvalue of [[sxx, sxy], [sxy, syy]]
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (s, c) = angle.sin_cos();
    Ok(canonical_sign(Vec2::new(c, s)))
}

pub(crate) fn canonical_sign(d: Vec2) -> Vec2 {
    if d.x < -AXIS_ZERO || (d.x.abs() <= AXIS_ZERO && d.y < 0.0) {
        -d
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec2, b: Vec2) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn collinear_on_x_axis() {
        let d = estimate_direction(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
        ])
        .unwrap();
        assert!(close(d, Vec2::new(1.0, 0.0)));
    }

    #[test]
    fn diagonal_line() {
        let pts: Vec<Vec2> = (0..5).map(|i| Vec2::new(i as f64, i as f64)).collect();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(estimate_direction(&pts).unwrap(), Vec2::new(h, h)));
    }

    #[test]
    fn vertical_road_is_well_defined() {
        let pts: Vec<Vec2> = (0..5).map(|i| Vec2::new(3.0, -(i as f64))).collect();
        let d = estimate_direction(&pts).unwrap();
        assert!(d.x.abs() < 1e-12);
        assert!((d.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(
            estimate_direction(&[]),
            Err(DegeneratePoints { distinct: 0 })
        );
        let same = [Vec2::new(1.0, 1.0); 4];
        assert_eq!(
            estimate_direction(&same),
            Err(DegeneratePoints { distinct: 1 })
        );
    }
}

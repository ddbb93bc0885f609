use crate::objectives::ObjectivePoint;

/// Exact 2-D hypervolume dominated by `front` and bounded by `reference`.
/// Points not strictly better than the reference in both objectives are
/// ignored.
pub fn hypervolume(front: &[ObjectivePoint], reference: [f64; 2]) -> f64 {
    let mut pts: Vec<[f64; 2]> = front
        .iter()
        .map(|p| p.as_array())
        .filter(|p| p[0] < reference[0] && p[1] < reference[1])
        .collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut ceiling = reference[1];
    for p in pts {
        if p[1] < ceiling {
            area += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    area
}

/// Component-wise maximum of all points scaled by 1.1; a non-positive
/// maximum maps to 1.
pub fn reference_point<'a>(points: impl IntoIterator<Item = &'a ObjectivePoint>) -> [f64; 2] {
    let mut max = [f64::NEG_INFINITY; 2];
    for p in points {
        max[0] = max[0].max(p.c1);
        max[1] = max[1].max(p.c2);
    }
    max.map(|m| if m > 0.0 { 1.1 * m } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<ObjectivePoint> {
        v.iter().map(|&(a, b)| ObjectivePoint::new(a, b)).collect()
    }

    #[test]
    fn single_point() {
        assert_eq!(hypervolume(&pts(&[(1.0, 1.0)]), [2.0, 2.0]), 1.0);
    }

    #[test]
    fn staircase() {
        assert_eq!(hypervolume(&pts(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]), [4.0, 4.0]), 6.0);
        assert_eq!(hypervolume(&pts(&[(3.0, 1.0), (1.0, 3.0), (2.0, 2.0)]), [4.0, 4.0]), 6.0);
    }

    #[test]
    fn dominated_and_outside_points_do_not_count() {
        let base = pts(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]);
        let mut more = base.clone();
        more.extend(pts(&[(2.5, 2.5), (5.0, 0.5), (3.0, 3.0)]));
        assert_eq!(hypervolume(&more, [4.0, 4.0]), hypervolume(&base, [4.0, 4.0]));
        assert_eq!(hypervolume(&[], [4.0, 4.0]), 0.0);
    }

    #[test]
    fn reference_scales_maxima() {
        let r = reference_point(&pts(&[(1.0, 3.0), (2.0, 0.0)]));
        assert!((r[0] - 2.2).abs() < 1e-12 && (r[1] - 3.3).abs() < 1e-12);
        assert_eq!(reference_point(&pts(&[(0.0, 0.0)])), [1.0, 1.0]);
    }
}

use crate::geom::{KdTree, Point3};

/// Mean squared nearest-neighbor distance from each point of `from` into `to`.
/// Terms are summed in `from` order.
pub fn directed_chamfer(from: &[Point3], to: &KdTree) -> f64 {
    if from.is_empty() || to.is_empty() {
        return f64::INFINITY;
    }
    let mut sum = 0.0;
    for &p in from {
        sum += to.nearest(p).expect("non-empty tree").1;
    }
    sum / from.len() as f64
}

/// Symmetric Chamfer distance: `directed(a -> b) + directed(b -> a)`, using
/// squared Euclidean distances. Infinite if either set is empty.
pub fn chamfer_distance(a: &KdTree, b: &KdTree) -> f64 {
    directed_chamfer(a.points(), b) + directed_chamfer(b.points(), a)
}

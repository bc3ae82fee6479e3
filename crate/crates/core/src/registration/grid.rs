use crate::geometry::Point;

/// Centres of the whole `step` x `step` cells that fit inside a
/// `width` x `height` frame, in row-major order: `(step/2 + i*step,
/// step/2 + j*step)` for `i < width / step`, `j < height / step`.
pub fn select_grid_points(width: usize, height: usize, step: usize) -> Vec<Point> {
    if step == 0 {
        return Vec::new();
    }
    let (nx, ny) = (width / step, height / step);
    let off = step / 2;
    let mut points = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            points.push(Point::new((off + i * step) as f64, (off + j * step) as f64));
        }
    }
    points
}

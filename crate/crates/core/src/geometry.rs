//! Screen-normalized Euclidean distance.

use thiserror::Error;

use crate::model::{Point, ScreenMeta};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("sentinel point has no location")]
    SentinelPoint,
    #[error("screen {0} has a zero dimension")]
    DegenerateScreen(String),
}

/// Euclidean distance between `p` and `q` divided by the screen diagonal.
///
/// Off-screen points are accepted and may yield values above 1.
pub fn normalized_distance<T: Real>(p: Point, q: Point, screen: &ScreenMeta) -> Result<T, GeometryError> {
    if p.is_sentinel() || q.is_sentinel() {
        return Err(GeometryError::SentinelPoint);
    }
    if screen.width == 0 || screen.height == 0 {
        return Err(GeometryError::DegenerateScreen(screen.screen_id.clone()));
    }
    Ok(raw_normalized_distance(p, q, screen))
}

/// Unchecked form used on scoring paths, where inputs come from untrusted model output.
pub(crate) fn raw_normalized_distance<T: Real>(p: Point, q: Point, screen: &ScreenMeta) -> T {
    let dx = T::lit((p.x - q.x) as f64);
    let dy = T::lit((p.y - q.y) as f64);
    let w = T::lit(f64::from(screen.width));
    let h = T::lit(f64::from(screen.height));
    (dx * dx + dy * dy).sqrt() / (w * w + h * h).sqrt()
}

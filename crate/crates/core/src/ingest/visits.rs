//! Stay-point detection over a raw location history.

use std::ops::Range;

use chrono::{DateTime, Duration, FixedOffset, Utc};
use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::model::PlaceRef;

use super::entities::SNAP_RADIUS_M;
use super::IngestError;

pub const DEFAULT_D_MAX_M: f64 = 200.0;
pub const DEFAULT_T_MIN_MINUTES: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub at: DateTime<FixedOffset>,
    pub point: GeoPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StayParams {
    pub d_max_m: f64,
    pub t_min_minutes: f64,
}

impl Default for StayParams {
    fn default() -> Self {
        StayParams { d_max_m: DEFAULT_D_MAX_M, t_min_minutes: DEFAULT_T_MIN_MINUTES }
    }
}

impl StayParams {
    fn t_min(&self) -> Duration {
        Duration::milliseconds((self.t_min_minutes * 60_000.0).round() as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Visit {
    pub place: PlaceRef,
    pub arrive: DateTime<FixedOffset>,
    pub depart: DateTime<FixedOffset>,
    pub point_count: usize,
}

impl Visit {
    /// Stable document id derived from the arrival instant.
    pub fn doc_id(&self) -> String {
        format!("gps-{}", self.arrive.with_timezone(&Utc).format("%Y%m%dT%H%M%SZ"))
    }
}

fn within_centroid(points: &[GpsFix], d_max: f64) -> bool {
    let geo: Vec<GeoPoint> = points.iter().map(|p| p.point).collect();
    match GeoPoint::centroid(&geo) {
        Some(c) => geo.iter().all(|p| p.distance_m(&c) <= d_max),
        None => false,
    }
}

/// Index ranges of stay points. Each run is anchored at its first fix: every
/// member lies within `d_max` of the anchor and of the run's centroid, and the
/// run lasts at least `t_min`.
pub fn stay_points(points: &[GpsFix], params: &StayParams) -> Result<Vec<Range<usize>>, IngestError> {
    if let Some(i) = points.windows(2).position(|w| w[1].at < w[0].at) {
        return Err(IngestError::UnsortedInput { index: i + 1 });
    }
    let t_min = params.t_min();
    let mut out = Vec::new();
    let mut i = 0;
    while i < points.len() {
        let mut j = i + 1;
        while j < points.len() && points[i].point.distance_m(&points[j].point) <= params.d_max_m {
            j += 1;
        }
        let mut end = j;
        let mut found = false;
        while end - i >= 2 && points[end - 1].at - points[i].at >= t_min {
            if within_centroid(&points[i..end], params.d_max_m) {
                found = true;
                break;
            }
            end -= 1;
        }
        if found {
            out.push(i..end);
            i = end;
        } else {
            i += 1;
        }
    }
    Ok(out)
}

/// Stay points snapped to the nearest known place within the snap radius, or
/// to a synthesized place at the centroid.
pub fn detect_visits<'a>(
    points: &[GpsFix],
    params: &StayParams,
    known: impl IntoIterator<Item = &'a PlaceRef> + Clone,
) -> Result<Vec<Visit>, IngestError> {
    let mut visits = Vec::new();
    for r in stay_points(points, params)? {
        let run = &points[r];
        let geo: Vec<GeoPoint> = run.iter().map(|p| p.point).collect();
        let Some(c) = GeoPoint::centroid(&geo) else { continue };
        let nearest = known
            .clone()
            .into_iter()
            .filter_map(|p| p.geo.map(|g| (g.distance_m(&c), p)))
            .filter(|(d, _)| *d <= SNAP_RADIUS_M)
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.canonical_id.cmp(&b.1.canonical_id)));
        let place = match nearest {
            Some((_, p)) => p.clone(),
            None => PlaceRef {
                canonical_id: format!("loc:{:.4},{:.4}", c.lat, c.lon),
                name: format!("location {:.4}, {:.4}", c.lat, c.lon),
                category: None,
                geo: Some(c),
            },
        };
        visits.push(Visit { place, arrive: run[0].at, depart: run[run.len() - 1].at, point_count: run.len() });
    }
    Ok(visits)
}

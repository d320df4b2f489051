//! Detect visits in a synthetic GPS track and snap them to known places.
//!
//! cargo run --example stay_points

use chrono::{Duration, FixedOffset, TimeZone};
use pdt_episodes::geo::GeoPoint;
use pdt_episodes::ingest::{detect_visits, stay_points, GpsFix, StayParams};
use pdt_episodes::model::PlaceRef;

fn main() {
    let tz = FixedOffset::west_opt(5 * 3600).unwrap();
    let start = tz.with_ymd_and_hms(2019, 3, 14, 18, 0, 0).unwrap();
    let cafe = GeoPoint::new(40.7291, -73.9965).unwrap();

    // Walk in, sit for 50 minutes with a little jitter, walk out.
    let mut track = Vec::new();
    for i in 0..4 {
        let p = GeoPoint::new(cafe.lat - 0.004 + 0.001 * i as f64, cafe.lon).unwrap();
        track.push(GpsFix { at: start + Duration::minutes(5 * i), point: p });
    }
    for i in 0..11 {
        let jitter = if i % 2 == 0 { 0.00005 } else { -0.00005 };
        let p = GeoPoint::new(cafe.lat + jitter, cafe.lon - jitter).unwrap();
        track.push(GpsFix { at: start + Duration::minutes(20 + 5 * i), point: p });
    }
    for i in 1..4 {
        let p = GeoPoint::new(cafe.lat, cafe.lon + 0.002 * i as f64).unwrap();
        track.push(GpsFix { at: start + Duration::minutes(70 + 5 * i), point: p });
    }

    let known = vec![PlaceRef {
        canonical_id: "aurora".into(),
        name: "Cafe Aurora".into(),
        category: Some("Restaurant".into()),
        geo: Some(cafe),
    }];
    for params in [StayParams::default(), StayParams { d_max_m: 200.0, t_min_minutes: 90.0 }] {
        println!("d_max {} m, t_min {} min", params.d_max_m, params.t_min_minutes);
        for r in stay_points(&track, &params).expect("track is sorted") {
            println!("  stay over fixes {}..{}", r.start, r.end);
        }
        for v in detect_visits(&track, &params, &known).expect("track is sorted") {
            println!(
                "  {} at {} from {} to {} ({} fixes)",
                v.doc_id(),
                v.place.name,
                v.arrive.format("%H:%M"),
                v.depart.format("%H:%M"),
                v.point_count
            );
        }
    }
}

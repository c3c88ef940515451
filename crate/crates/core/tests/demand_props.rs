mod common;

use common::random_graph;
use dispatch_core::demand::{
    day_of, ingest_trips, predict_point_demand, region_gap, DayType, DemandProfile, Location,
    ProfileConfig, RawTrip, TripRequest, TripStore, SECONDS_PER_DAY,
};
use dispatch_core::graph::SnapIndex;
use dispatch_core::{rng, Partition, Point, VertexId};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

// 2024-01-01, a Monday
const MONDAY: i64 = 19_723 * SECONDS_PER_DAY;

fn random_history(seed: u64, n_vertices: u32, days: i64, trips: usize) -> Vec<TripRequest> {
    let mut r = rng::seeded(seed);
    (0..trips)
        .map(|_| {
            let p = r.gen_range(0..n_vertices);
            let mut d = r.gen_range(0..n_vertices);
            if d == p {
                d = (d + 1) % n_vertices;
            }
            TripRequest {
                id: 0,
                request_time: MONDAY + r.gen_range(0..days * SECONDS_PER_DAY),
                pickup: VertexId(p),
                dropoff: VertexId(d),
            }
        })
        .collect()
}

#[test]
fn well_formed_rows_and_far_pickup() {
    let g = random_graph(3, 30, 0, 10);
    let snap = SnapIndex::new(&g, 200.0).unwrap();
    let rows: Vec<RawTrip> = (0..3)
        .map(|i| RawTrip {
            line: i + 2,
            request_time: 300 - i as i64 * 100,
            pickup: Location::Node(i as u32),
            dropoff: Location::Node(i as u32 + 1),
        })
        .collect();
    let (store, summary) = ingest_trips(&rows, &g, &snap);
    assert_eq!(store.len(), 3);
    assert_eq!(summary.dropped(), 0);
    assert!(store
        .trips()
        .windows(2)
        .all(|w| w[0].request_time <= w[1].request_time));

    // a point 500 m from every vertex
    let far = Point::new(-10_000.0, -10_000.0);
    let rows = vec![RawTrip {
        line: 2,
        request_time: 0,
        pickup: Location::Point(far),
        dropoff: Location::Node(0),
    }];
    let (store, summary) = ingest_trips(&rows, &g, &snap);
    assert!(store.is_empty());
    assert_eq!(summary.dropped_unsnapped, 1);
}

#[test]
fn two_day_mean_of_two_and_four() {
    let mut trips = Vec::new();
    for (day, count) in [(0, 2), (1, 4)] {
        for i in 0..count {
            trips.push(TripRequest {
                id: 0,
                request_time: MONDAY + day * SECONDS_PER_DAY + 60 + i,
                pickup: VertexId(0),
                dropoff: VertexId(1),
            });
        }
    }
    let store = TripStore::from_requests(trips);
    let t = MONDAY + 2 * SECONDS_PER_DAY + 100;
    assert_eq!(predict_point_demand(&store, VertexId(0), t, 600).0, 3.0);
    assert_eq!(
        predict_point_demand(&store, VertexId(5), t, 600),
        (0.0, 0.0)
    );
}

#[test]
fn region_gap_arithmetic() {
    let p = Partition::from_assignment(vec![VertexId(0), VertexId(2)], vec![0, 0, 1]);
    let profile =
        DemandProfile::from_history(&TripStore::default(), 3, ProfileConfig::default()).unwrap();
    assert_eq!(
        region_gap(&p, &profile, &[0, 0], 0).unwrap(),
        vec![0.0, 0.0]
    );
    let gaps = [2.0, 1.0, 0.0];
    let got = dispatch_core::demand::region_gap_from_vertex_gaps(&p, &gaps, &[1, 0]).unwrap();
    assert_eq!(got, vec![2.0, 0.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn store_ignores_input_order(seed in any::<u64>()) {
        let trips = random_history(seed, 12, 3, 100);
        let mut shuffled = trips.clone();
        shuffled.shuffle(&mut rng::seeded(seed ^ 1));
        prop_assert_eq!(TripStore::from_requests(trips), TripStore::from_requests(shuffled));
    }

    #[test]
    fn point_prediction_matches_flat_recount(seed in any::<u64>(), offset in 0i64..SECONDS_PER_DAY, days_ahead in 1i64..4) {
        let store = TripStore::from_requests(random_history(seed, 6, 5, 400));
        let t = MONDAY + (4 + days_ahead) * SECONDS_PER_DAY + offset;
        let day = day_of(t);
        let ty = DayType::of_day(day);
        let prior: Vec<i64> = (day_of(MONDAY)..day).collect();
        let same: Vec<i64> = prior.iter().copied().filter(|&d| DayType::of_day(d) == ty).collect();
        let days = if same.is_empty() { prior } else { same };
        let bucket = offset / 600;
        for v in 0..6 {
            let (mut pk, mut dp) = (0.0, 0.0);
            for trip in store.trips() {
                let d = day_of(trip.request_time);
                if !days.contains(&d) || (trip.request_time - d * SECONDS_PER_DAY) / 600 != bucket {
                    continue;
                }
                if trip.pickup.0 == v {
                    pk += 1.0;
                }
                if trip.dropoff.0 == v {
                    dp += 1.0;
                }
            }
            let n = days.len() as f64;
            prop_assert_eq!(predict_point_demand(&store, VertexId(v), t, 600), (pk / n, dp / n));
        }
    }

    #[test]
    fn profile_agrees_with_direct_prediction(seed in any::<u64>(), offset in 0i64..SECONDS_PER_DAY) {
        // a full week so both day types are present
        let store = TripStore::from_requests(random_history(seed, 6, 7, 500));
        let profile = DemandProfile::from_history(&store, 6, ProfileConfig::default()).unwrap();
        let t = MONDAY + 7 * SECONDS_PER_DAY + offset;
        for v in 0..6 {
            let (a, b) = profile.bucket_prediction(VertexId(v), t);
            let (c, d) = predict_point_demand(&store, VertexId(v), t, 600);
            prop_assert!((a - c).abs() < 1e-12 && (b - d).abs() < 1e-12);
            let gap = profile.gap(VertexId(v), t);
            let (wp, wd) = profile.window_prediction(VertexId(v), t, t + 600);
            prop_assert_eq!(gap, wp - wd);
        }
        prop_assert_eq!(DemandProfile::from_history(&store, 6, ProfileConfig::default()).unwrap(), profile);
    }

    #[test]
    fn gaps_sum_to_window_net_demand(seed in any::<u64>(), t in 0i64..SECONDS_PER_DAY) {
        let store = TripStore::from_requests(random_history(seed, 8, 3, 300));
        let profile = DemandProfile::from_history(&store, 8, ProfileConfig::default()).unwrap();
        let t = MONDAY + 3 * SECONDS_PER_DAY + t;
        let gaps: f64 = profile.gaps(t).iter().sum();
        let net: f64 = (0..8)
            .map(|v| {
                let (p, d) = profile.window_prediction(VertexId(v), t, t + 600);
                p - d
            })
            .sum();
        prop_assert!((gaps - net).abs() < 1e-9);
    }

    #[test]
    fn region_gap_equals_per_subarea_sum(seed in any::<u64>()) {
        let mut r = rng::seeded(seed);
        let n = 12;
        let assignment: Vec<u32> = (0..n).map(|v| if v < 3 { v as u32 } else { r.gen_range(0..3) }).collect();
        let p = Partition::from_assignment(vec![VertexId(0), VertexId(1), VertexId(2)], assignment.clone());
        let store = TripStore::from_requests(random_history(seed, n as u32, 2, 200));
        let profile = DemandProfile::from_history(&store, n, ProfileConfig::default()).unwrap();
        let supply = [r.gen_range(0..4), r.gen_range(0..4), r.gen_range(0..4)];
        let t = MONDAY + 2 * SECONDS_PER_DAY + r.gen_range(0..SECONDS_PER_DAY);
        let got = region_gap(&p, &profile, &supply, t).unwrap();
        for j in 0..3 {
            let mut want = -(supply[j] as f64);
            for (v, &a) in assignment.iter().enumerate() {
                if a == j as u32 {
                    want += profile.gap(VertexId::from_index(v), t);
                }
            }
            prop_assert!((got[j] - want).abs() < 1e-9);
        }
    }
}

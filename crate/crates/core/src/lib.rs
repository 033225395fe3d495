//! Indoor positioning and navigation.
//!
//! Locations are estimated by matching a live Wi-Fi scan against a radio
//! map of per-access-point mean RSSI recorded at surveyed points, and
//! routes are found by Dijkstra over a graph of geocoded building nodes.
//! A seeded propagation simulator drives end-to-end evaluation.

pub mod cli;
pub mod document;
pub mod fixtures;
pub mod geo;
pub mod localization;
pub mod navgraph;
pub mod propagation;
pub mod radiomap;
pub mod service;
pub mod simulator;
pub mod wire;

pub use geo::{haversine_distance, parse_bssid, Bssid, GeoPoint, RssiDbm};
pub use localization::{locate, multilaterate, signal_distance, LocationEstimate, MatcherConfig, Weighting};
pub use navgraph::{build_graph, shortest_path, NavGraph, Route};
pub use propagation::{distance_from_power, received_power_dbm, synth_scan, PropagationParams};
pub use radiomap::{build_radio_map, ingest_scan_log, load_radio_map, save_radio_map, RadioMap, Scan};
pub use simulator::{compare_methods, evaluate_localization, generate_training_set, EvalReport, Scenario};

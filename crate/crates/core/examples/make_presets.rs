//! Writes the committed figure presets from the geometry picked with
//! `select_geometry`: cube seed 2, with bath spin 6 listed first and spins 0
//! and 2 second and third.
//!
//! cargo run --release --example make_presets -- <preset-dir>

use gcce_lab::geometry::scaled_cube_positions;
use serde_json::{json, Value};

const SEED: u64 = 2;
const ORDER: [usize; 8] = [6, 0, 2, 1, 3, 4, 5, 7];

fn electron(label: &str, p: [f64; 3]) -> Value {
    json!({"label": label, "position_A": p, "spin": 0.5, "gamma": "electron"})
}

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "presets".into());
    let (pos, edge) = scaled_cube_positions(SEED, 8, 1.0).unwrap();
    eprintln!("cube edge {edge} A");
    let bath: Vec<Value> = ORDER
        .iter()
        .enumerate()
        .map(|(k, &i)| electron(&format!("e{}", k + 1), [pos[i].x, pos[i].y, pos[i].z]))
        .collect();
    let system = json!({
        "central": electron("central", [0.0, 0.0, 0.0]),
        "bath": bath,
        "field_mT": [0.0, 0.0, 10.0],
    });
    let relax_state = json!({"central": {"level": 0}, "bath": "maximally_mixed"});
    let h = std::f64::consts::FRAC_1_SQRT_2;

    let pairs = |spins: &[usize]| -> Vec<Value> {
        let mut out = Vec::new();
        for (k, &a) in spins.iter().enumerate() {
            for &b in &spins[k + 1..] {
                out.push(json!([a, b]));
            }
        }
        out
    };
    let mut disjoint = vec![json!([]), json!([0]), json!([1]), json!([2])];
    disjoint.extend(pairs(&[3, 4, 5, 6, 7]));
    let mut overlap = disjoint.clone();
    overlap.extend((3..8).map(|k| json!([0, k])));

    let presets = [
        (
            "figure4",
            json!({
                "system": system,
                "initial_state": relax_state,
                "grid": {"t_max_ms": 20.0, "n_points": 401},
                "mode": "figure4",
                "cce": {"orders": [1, 2, 3, 4, 5, 6, 7, 8], "element": [0, 0]},
                "sampling": {"seed": SEED},
            }),
        ),
        (
            "figure5",
            json!({
                "system": system,
                "initial_state": relax_state,
                "grid": {"t_max_ms": 20.0, "n_points": 401},
                "mode": "figure5",
                "cce": {
                    "element": [0, 0],
                    "include_exact": false,
                    "whitelists": [
                        {"label": "restricted_disjoint", "clusters": disjoint},
                        {"label": "restricted_overlap", "clusters": overlap},
                    ],
                },
                "sampling": {"seed": SEED},
            }),
        ),
        (
            "figure6",
            json!({
                "system": system,
                "initial_state": {"central": {"amplitudes": [[h, 0.0], [h, 0.0]]}, "bath": "maximally_mixed"},
                "grid": {"t_max_ms": 1.0, "n_points": 201},
                "mode": "figure6",
                "cce": {"orders": [1, 2, 3, 4], "element": [0, 1], "dynamics": "conditional"},
                "sampling": {"samples": 100, "seed": SEED, "reference": "sampled"},
            }),
        ),
    ];
    for (name, value) in presets {
        let path = format!("{dir}/{name}.json");
        std::fs::write(&path, serde_json::to_string_pretty(&value).unwrap() + "\n").unwrap();
        eprintln!("wrote {path}");
    }
}

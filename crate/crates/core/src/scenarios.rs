//! Bundled scenarios.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::geom::Vec2;
use crate::grid::GridSpec;
use crate::risk::{Footprint, DEFAULT_EGO_MASS};
use crate::sim::{Role, Scenario, SceneObject, SensorConfig, Shape, Trajectory, Vehicle, Waypoint};

fn wp(t: f64, x: f64, y: f64, heading: f64) -> Waypoint {
    Waypoint {
        t,
        position: Vec2::new(x, y),
        heading,
    }
}

fn car() -> Footprint {
    Footprint {
        length: 4.5,
        width: 2.0,
    }
}

/// Four-way intersection centered on the origin. The ego drives west along
/// the westbound lane past two parked cars and a bus stopped in the
/// eastbound lane, then leaves the map near the end. The bus hides the south
/// leg from the ego. The collaborator approaches eastbound with a clear view
/// and turns right (south). A pedestrian crosses the south leg at 1.4 m/s.
pub fn occluded_intersection() -> Scenario {
    let duration = 12.0;
    let spec = GridSpec {
        origin: Vec2::new(-30.0, -30.0),
        cell_size: 0.5,
        width: 120,
        height: 120,
        tau: 0.1,
    };
    let ego = Vehicle {
        id: "ego".into(),
        role: Role::Ego,
        trajectory: Trajectory(vec![wp(0.0, 24.0, 2.0, PI), wp(duration, -36.0, 2.0, PI)]),
        footprint: car(),
        mass: DEFAULT_EGO_MASS,
        sensor: SensorConfig::default(),
    };
    let collaborator = Vehicle {
        id: "collaborator".into(),
        role: Role::Collaborator,
        trajectory: Trajectory(vec![
            wp(0.0, -26.0, -2.0, 0.0),
            wp(5.0, -8.0, -2.0, 0.0),
            wp(6.5, -4.5, -4.5, -FRAC_PI_4),
            wp(8.0, -2.0, -8.0, -FRAC_PI_2),
            wp(12.0, -2.0, -22.0, -FRAC_PI_2),
        ]),
        footprint: car(),
        mass: DEFAULT_EGO_MASS,
        sensor: SensorConfig::default(),
    };
    let block = |id: &str, x: f64, y: f64| SceneObject {
        id: id.into(),
        shape: Shape::Rectangle {
            length: 16.0,
            width: 16.0,
        },
        trajectory: Trajectory::stationary(Vec2::new(x, y), 0.0, duration),
        is_occluder: true,
    };
    let parked = |id: &str, x: f64| SceneObject {
        id: id.into(),
        shape: Shape::Rectangle {
            length: 4.5,
            width: 1.9,
        },
        trajectory: Trajectory::stationary(Vec2::new(x, 4.5), PI, duration),
        is_occluder: false,
    };
    let objects = vec![
        SceneObject {
            id: "bus".into(),
            shape: Shape::Rectangle {
                length: 12.0,
                width: 2.6,
            },
            trajectory: Trajectory::stationary(Vec2::new(12.0, -0.85), 0.0, duration),
            is_occluder: true,
        },
        SceneObject {
            id: "pedestrian".into(),
            shape: Shape::Circle { radius: 0.3 },
            trajectory: Trajectory(vec![wp(0.0, 8.0, -10.0, PI), wp(duration, -8.8, -10.0, PI)]),
            is_occluder: false,
        },
        parked("parked_car_1", 21.0),
        parked("parked_car_2", 14.0),
        block("block_ne", 20.0, 20.0),
        block("block_nw", -20.0, 20.0),
        block("block_sw", -20.0, -20.0),
        block("block_se", 20.0, -20.0),
    ];
    Scenario {
        spec,
        duration,
        vehicles: vec![ego, collaborator],
        objects,
    }
}

/// Nothing but a parked ego and a parked collaborator in open space.
pub fn empty_world(spec: GridSpec, duration: f64) -> Scenario {
    let center = spec.origin + (spec.extent_max() - spec.origin) * 0.5;
    let parked = |id: &str, role, pos: Vec2| Vehicle {
        id: id.into(),
        role,
        trajectory: Trajectory::stationary(pos, 0.0, duration),
        footprint: car(),
        mass: DEFAULT_EGO_MASS,
        sensor: SensorConfig::default(),
    };
    Scenario {
        spec,
        duration,
        vehicles: vec![
            parked("ego", Role::Ego, center),
            parked("collaborator", Role::Collaborator, center + Vec2::new(-40.0, 0.0)),
        ],
        objects: vec![],
    }
}

//! Reference scene, skill registry, proficiencies and the three benchmark
//! tasks. These are fixture choices; tests and the default config use them.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::backend::{ErrorMode, ErrorModeConfig, ErrorTag};
use crate::planner::{NutrientEntry, NutrientTable, Stage, TaskRequest};
use crate::vla::{
    FaultMix, Proficiency, ProficiencyEntry, ProficiencyTable, ScriptedVla, Skill, SkillEntry,
    SkillRegistry,
};
use crate::world::{
    Cell, CheckpointPredicate, Kind, ObjectSpec, Occlusion, Region, SceneConfig, Zone, ZoneRegion,
    DEFAULT_GRID, DEFAULT_WRIST_RADIUS,
};

pub const FIBER_TASK: &str = "I need more dietary fiber";
pub const PROTEIN_TASK: &str = "I want protein and fat";
pub const BRUNCH_TASK: &str = "please prepare a brunch for me";
pub const TASK_TEXTS: [&str; 3] = [FIBER_TASK, PROTEIN_TASK, BRUNCH_TASK];

/// Brunch items that go to the pan instead of the plate.
pub const COOK_FIRST: [Kind; 2] = [Kind::Sausage, Kind::Shrimp];

pub fn plate_region() -> Region {
    Region {
        min: Cell::new(8, 8),
        max: Cell::new(9, 9),
    }
}

pub fn pan_region() -> Region {
    Region {
        min: Cell::new(8, 3),
        max: Cell::new(9, 4),
    }
}

fn spec(id: &str, kind: Kind, x: i32, y: i32) -> ObjectSpec {
    ObjectSpec {
        id: id.to_string(),
        kind: kind.as_str().to_string(),
        cell: Cell::new(x, y),
    }
}

/// 12x12 table. From the front the chips hide the mushroom behind them.
pub fn reference_scene() -> SceneConfig {
    SceneConfig {
        grid: DEFAULT_GRID,
        zones: vec![
            ZoneRegion {
                zone: Zone::Plate,
                region: plate_region(),
            },
            ZoneRegion {
                zone: Zone::Pan,
                region: pan_region(),
            },
        ],
        objects: vec![
            spec("broccoli", Kind::Broccoli, 2, 2),
            spec("mushroom", Kind::Mushroom, 3, 7),
            spec("sausage", Kind::Sausage, 2, 9),
            spec("shrimp", Kind::Shrimp, 5, 5),
            spec("chips", Kind::Chips, 3, 4),
            spec("plate", Kind::Plate, 8, 8),
            spec("pan", Kind::Pan, 8, 3),
        ],
        gripper_start: Cell::new(6, 0),
        wrist_radius: DEFAULT_WRIST_RADIUS,
        occlusions: vec![Occlusion {
            occluder: Cell::new(3, 4),
            hidden: Cell::new(3, 7),
        }],
    }
}

pub fn reference_registry() -> SkillRegistry {
    SkillRegistry {
        entries: vec![
            SkillEntry {
                kinds: Kind::FOODS.to_vec(),
                zones: vec![Zone::Plate],
            },
            SkillEntry {
                kinds: COOK_FIRST.to_vec(),
                zones: vec![Zone::Pan],
            },
        ],
    }
}

pub fn reference_proficiency_entries() -> Vec<ProficiencyEntry> {
    reference_registry()
        .skills()
        .map(|s| {
            let (success_prob, fault_mix) = if s.kind == Kind::Shrimp {
                (
                    0.5,
                    FaultMix {
                        near_miss_place: 0.6,
                        drop_early: 0.4,
                        ..Default::default()
                    },
                )
            } else {
                (
                    0.9,
                    FaultMix {
                        near_miss_place: 0.4,
                        drop_early: 0.3,
                        freeze: 0.2,
                        wrong_object: 0.1,
                    },
                )
            };
            ProficiencyEntry {
                kind: s.kind,
                zone: s.zone,
                success_prob,
                fault_mix,
            }
        })
        .collect()
}

pub fn reference_proficiency() -> ProficiencyTable {
    ProficiencyTable::from_entries(reference_proficiency_entries()).expect("fixture table is valid")
}

/// Every registry skill succeeds.
pub fn perfect_proficiency() -> ProficiencyTable {
    ProficiencyTable::uniform(
        &reference_registry(),
        Proficiency {
            success_prob: 1.0,
            fault_mix: FaultMix::default(),
        },
    )
}

pub fn reference_vla(seed: u64, step_cap: u32) -> ScriptedVla {
    ScriptedVla::new(reference_registry(), reference_proficiency(), seed, step_cap)
}

pub fn reference_error_modes() -> ErrorModeConfig {
    ErrorModeConfig {
        modes: vec![
            ErrorMode {
                tag: ErrorTag::FalseDoneNearMiss,
                rate: 0.5,
                scope: "shrimp".to_string(),
            },
            ErrorMode {
                tag: ErrorTag::FalseFailureOnApproach,
                rate: 0.3,
                scope: "*".to_string(),
            },
        ],
    }
}

pub fn nutrient_table() -> NutrientTable {
    let plate = |kind| Skill {
        kind,
        zone: Zone::Plate,
    };
    let brunch = Kind::FOODS
        .iter()
        .map(|&kind| Skill {
            kind,
            zone: if COOK_FIRST.contains(&kind) {
                Zone::Pan
            } else {
                Zone::Plate
            },
        })
        .collect();
    NutrientTable {
        entries: vec![
            NutrientEntry {
                keyword: "dietary fiber".to_string(),
                items: vec![plate(Kind::Broccoli), plate(Kind::Mushroom)],
            },
            NutrientEntry {
                keyword: "protein and fat".to_string(),
                items: vec![plate(Kind::Sausage), plate(Kind::Shrimp)],
            },
            NutrientEntry {
                keyword: "brunch".to_string(),
                items: brunch,
            },
        ],
    }
}

fn stage(id: &str, predicate: CheckpointPredicate) -> Stage {
    Stage {
        id: id.to_string(),
        predicate,
    }
}

pub fn fiber_task() -> TaskRequest {
    TaskRequest {
        text: FIBER_TASK.to_string(),
        stages: vec![
            stage("broccoli", CheckpointPredicate::on(Zone::Plate, Kind::Broccoli)),
            stage("mushroom", CheckpointPredicate::on(Zone::Plate, Kind::Mushroom)),
        ],
    }
}

/// The third stage is the conjunction: both protein items served together.
pub fn protein_task() -> TaskRequest {
    TaskRequest {
        text: PROTEIN_TASK.to_string(),
        stages: vec![
            stage("sausage", CheckpointPredicate::on(Zone::Plate, Kind::Sausage)),
            stage("shrimp", CheckpointPredicate::on(Zone::Plate, Kind::Shrimp)),
            stage(
                "served",
                CheckpointPredicate::all([(Zone::Plate, Kind::Sausage), (Zone::Plate, Kind::Shrimp)]),
            ),
        ],
    }
}

pub fn brunch_task() -> TaskRequest {
    TaskRequest {
        text: BRUNCH_TASK.to_string(),
        stages: nutrient_table().entries[2]
            .items
            .iter()
            .map(|s| stage(s.kind.as_str(), CheckpointPredicate::on(s.zone, s.kind)))
            .collect(),
    }
}

pub fn reference_tasks() -> Vec<TaskRequest> {
    vec![fiber_task(), protein_task(), brunch_task()]
}

/// Short name used for run directories and report rows.
pub fn task_slug(text: &str) -> String {
    let lower = crate::vla::normalize(text);
    for (key, slug) in [("fiber", "fiber"), ("protein", "protein"), ("brunch", "brunch")] {
        if lower.contains(key) {
            return slug.to_string();
        }
    }
    lower
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

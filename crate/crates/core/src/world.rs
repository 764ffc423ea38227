//! Symbolic tabletop world.
//!
//! The table is an `N x N` grid with fixed zone regions (plate, pan). Objects
//! occupy cells; an object's zone follows from the region containing its cell
//! unless it is held. States are immutable values: every operation returns a
//! new [`SceneState`] and the world itself only stores configuration and
//! snapshots.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{self, SimRng};

pub const DEFAULT_GRID: i32 = 12;
pub const DEFAULT_WRIST_RADIUS: i32 = 2;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Broccoli,
    Mushroom,
    Sausage,
    Shrimp,
    Chips,
    Plate,
    Pan,
}

impl Kind {
    /// Food kinds in the fixed tie-break order.
    pub const FOODS: [Kind; 5] = [
        Kind::Broccoli,
        Kind::Mushroom,
        Kind::Sausage,
        Kind::Shrimp,
        Kind::Chips,
    ];

    pub fn is_fixture(self) -> bool {
        matches!(self, Kind::Plate | Kind::Pan)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Broccoli => "broccoli",
            Kind::Mushroom => "mushroom",
            Kind::Sausage => "sausage",
            Kind::Shrimp => "shrimp",
            Kind::Chips => "chips",
            Kind::Plate => "plate",
            Kind::Pan => "pan",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Some(match s {
            "broccoli" => Kind::Broccoli,
            "mushroom" => Kind::Mushroom,
            "sausage" => Kind::Sausage,
            "shrimp" => Kind::Shrimp,
            "chips" => Kind::Chips,
            "plate" => Kind::Plate,
            "pan" => Kind::Pan,
            _ => return None,
        })
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    Table,
    Plate,
    Pan,
    Gripper,
}

impl Zone {
    pub fn as_str(self) -> &'static str {
        match self {
            Zone::Table => "table",
            Zone::Plate => "plate",
            Zone::Pan => "pan",
            Zone::Gripper => "gripper",
        }
    }

    pub fn parse(s: &str) -> Option<Zone> {
        Some(match s {
            "table" => Zone::Table,
            "plate" => Zone::Plate,
            "pan" => Zone::Pan,
            "gripper" => Zone::Gripper,
            _ => return None,
        })
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grid coordinate, serialized as `[x, y]`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn midpoint(self, other: Cell) -> Cell {
        Cell::new(
            (self.x + other.x).div_euclid(2),
            (self.y + other.y).div_euclid(2),
        )
    }
}

impl From<[i32; 2]> for Cell {
    fn from(v: [i32; 2]) -> Self {
        Cell::new(v[0], v[1])
    }
}

impl From<Cell> for [i32; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Inclusive rectangle of cells.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub min: Cell,
    pub max: Cell,
}

impl Region {
    pub fn contains(&self, c: Cell) -> bool {
        c.x >= self.min.x && c.x <= self.max.x && c.y >= self.min.y && c.y <= self.max.y
    }

    /// Chebyshev distance from `c` to the nearest cell of the region (0 inside).
    pub fn distance(&self, c: Cell) -> i32 {
        let dx = (self.min.x - c.x).max(c.x - self.max.x).max(0);
        let dy = (self.min.y - c.y).max(c.y - self.max.y).max(0);
        dx.max(dy)
    }

    pub fn overlaps(&self, other: &Region) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (self.min.y..=self.max.y)
            .flat_map(move |y| (self.min.x..=self.max.x).map(move |x| Cell::new(x, y)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneRegion {
    pub zone: Zone,
    pub region: Region,
}

/// Raw object entry of a scene configuration. The kind is validated by
/// [`World::new`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub kind: String,
    pub cell: Cell,
}

/// Front-camera occlusion: while any object sits on `occluder`, objects on
/// `hidden` are not visible from the front.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occlusion {
    pub occluder: Cell,
    pub hidden: Cell,
}

fn default_grid() -> i32 {
    DEFAULT_GRID
}

fn default_wrist_radius() -> i32 {
    DEFAULT_WRIST_RADIUS
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default = "default_grid")]
    pub grid: i32,
    pub zones: Vec<ZoneRegion>,
    pub objects: Vec<ObjectSpec>,
    pub gripper_start: Cell,
    #[serde(default = "default_wrist_radius")]
    pub wrist_radius: i32,
    #[serde(default)]
    pub occlusions: Vec<Occlusion>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("grid size must be positive, got {0}")]
    BadGrid(i32),
    #[error("object `{id}` has unknown kind `{kind}`")]
    UnknownKind { id: String, kind: String },
    #[error("object `{0}` is outside the grid")]
    OutOfGrid(String),
    #[error("objects `{0}` and `{1}` overlap at the same cell")]
    OverlappingObjects(String, String),
    #[error("duplicate object id `{0}`")]
    DuplicateId(String),
    #[error("zone regions {0} and {1} overlap")]
    OverlappingZones(Zone, Zone),
    #[error("zone {0} cannot be a configured region")]
    BadZone(Zone),
    #[error("zone region for {0} lies outside the grid")]
    ZoneOutOfGrid(Zone),
    #[error("gripper start lies outside the grid")]
    GripperOutOfGrid,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SnapshotError {
    #[error("unknown snapshot id {0}")]
    Unknown(SnapshotId),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PredicateError {
    #[error("unknown kind `{0}` in predicate")]
    UnknownKind(String),
    #[error("unknown zone `{0}` in predicate")]
    UnknownZone(String),
    #[error("malformed predicate `{0}`")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: String,
    pub kind: Kind,
    pub cell: Cell,
    pub zone: Zone,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GripperState {
    pub cell: Cell,
    pub holding: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneState {
    pub step_index: u64,
    pub objects: Vec<ObjectInstance>,
    pub gripper: GripperState,
    #[serde(with = "rng::serde_state")]
    pub rng_state: SimRng,
}

impl SceneState {
    pub fn object(&self, id: &str) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn first_of_kind(&self, kind: Kind) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.kind == kind)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraId {
    Top,
    Front,
    Wrist,
}

impl CameraId {
    pub const ALL: [CameraId; 3] = [CameraId::Top, CameraId::Front, CameraId::Wrist];

    pub fn as_str(self) -> &'static str {
        match self {
            CameraId::Top => "top",
            CameraId::Front => "front",
            CameraId::Wrist => "wrist",
        }
    }

    pub fn parse(s: &str) -> Option<CameraId> {
        match s {
            "top" => Some(CameraId::Top),
            "front" => Some(CameraId::Front),
            "wrist" => Some(CameraId::Wrist),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibleObject {
    pub id: String,
    pub kind: Kind,
    pub cell: Cell,
    pub zone: Zone,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub step_index: u64,
    pub camera_id: CameraId,
    pub gripper: Cell,
    pub visible_objects: Vec<VisibleObject>,
    pub held: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
}

impl Frame {
    pub fn find_kind(&self, kind: Kind) -> Option<&VisibleObject> {
        self.visible_objects.iter().find(|o| o.kind == kind)
    }

    pub fn held_kind(&self) -> Option<Kind> {
        let id = self.held.as_ref()?;
        self.visible_objects.iter().find(|o| &o.id == id).map(|o| o.kind)
    }

    /// Whether the observable scene differs, ignoring the step stamp.
    pub fn differs_from(&self, other: &Frame) -> bool {
        self.gripper != other.gripper
            || self.held != other.held
            || self.visible_objects != other.visible_objects
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveAction {
    MoveTo(Cell),
    Grasp(String),
    Release,
    Noop,
}

/// World-level effect of an injected controller fault on a single primitive.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultDraw {
    #[default]
    Clean,
    NearMissPlace,
    DropEarly,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub moved: bool,
    pub grasped: bool,
    pub released: bool,
    pub dropped: bool,
    pub noop: bool,
}

impl StepOutcome {
    fn noop() -> Self {
        StepOutcome {
            noop: true,
            ..Default::default()
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SnapshotId(pub u64);

impl fmt::Display for SnapshotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "snap-{}", self.0)
    }
}

/// Conjunctive checkpoint predicate over `on(zone, kind)` atoms.
///
/// Textual form: `on(plate, shrimp)` or `on(plate, shrimp) && on(pan, sausage)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CheckpointPredicate {
    atoms: Vec<(String, String)>,
}

impl CheckpointPredicate {
    pub fn on(zone: Zone, kind: Kind) -> Self {
        CheckpointPredicate {
            atoms: alloc::vec![(zone.as_str().to_string(), kind.as_str().to_string())],
        }
    }

    pub fn all(parts: impl IntoIterator<Item = (Zone, Kind)>) -> Self {
        CheckpointPredicate {
            atoms: parts
                .into_iter()
                .map(|(z, k)| (z.as_str().to_string(), k.as_str().to_string()))
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, PredicateError> {
        let mut atoms = Vec::new();
        for part in text.split("&&") {
            let p = part.trim();
            let inner = p
                .strip_prefix("on(")
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| PredicateError::Malformed(p.to_string()))?;
            let mut args = inner.split(',').map(str::trim);
            let (zone, kind) = match (args.next(), args.next(), args.next()) {
                (Some(z), Some(k), None) if !z.is_empty() && !k.is_empty() => (z, k),
                _ => return Err(PredicateError::Malformed(p.to_string())),
            };
            atoms.push((zone.to_string(), kind.to_string()));
        }
        Ok(CheckpointPredicate { atoms })
    }

    /// Typed atoms; fails on the first unknown zone or kind.
    pub fn resolved(&self) -> Result<Vec<(Zone, Kind)>, PredicateError> {
        self.atoms
            .iter()
            .map(|(z, k)| {
                let zone = Zone::parse(z).ok_or_else(|| PredicateError::UnknownZone(z.clone()))?;
                let kind = Kind::parse(k).ok_or_else(|| PredicateError::UnknownKind(k.clone()))?;
                Ok((zone, kind))
            })
            .collect()
    }
}

impl fmt::Display for CheckpointPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (z, k)) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "on({z}, {k})")?;
        }
        Ok(())
    }
}

impl TryFrom<String> for CheckpointPredicate {
    type Error = PredicateError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        CheckpointPredicate::parse(&s)
    }
}

impl From<CheckpointPredicate> for String {
    fn from(p: CheckpointPredicate) -> String {
        p.to_string()
    }
}

/// Evaluate a checkpoint predicate. Conjunctions short-circuit on the first
/// false atom; atoms are resolved lazily, so an unknown name after a false
/// atom is not reported.
pub fn eval_predicate(state: &SceneState, p: &CheckpointPredicate) -> Result<bool, PredicateError> {
    for (z, k) in &p.atoms {
        let zone = Zone::parse(z).ok_or_else(|| PredicateError::UnknownZone(z.clone()))?;
        let kind = Kind::parse(k).ok_or_else(|| PredicateError::UnknownKind(k.clone()))?;
        let met = state
            .objects
            .iter()
            .any(|o| o.kind == kind && o.zone == zone);
        if !met {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A validated scene plus the snapshots issued against it.
#[derive(Clone, Debug)]
pub struct World {
    config: SceneConfig,
    kinds: Vec<Kind>,
    snapshots: BTreeMap<SnapshotId, SceneState>,
    next_snapshot: u64,
}

impl World {
    pub fn new(config: SceneConfig) -> Result<World, ConfigError> {
        if config.grid <= 0 {
            return Err(ConfigError::BadGrid(config.grid));
        }
        let grid = config.grid;
        let in_grid = |c: Cell| c.x >= 0 && c.y >= 0 && c.x < grid && c.y < grid;

        for (i, a) in config.zones.iter().enumerate() {
            if !matches!(a.zone, Zone::Plate | Zone::Pan) {
                return Err(ConfigError::BadZone(a.zone));
            }
            if !in_grid(a.region.min) || !in_grid(a.region.max) {
                return Err(ConfigError::ZoneOutOfGrid(a.zone));
            }
            for b in &config.zones[i + 1..] {
                if a.region.overlaps(&b.region) {
                    return Err(ConfigError::OverlappingZones(a.zone, b.zone));
                }
            }
        }
        if !in_grid(config.gripper_start) {
            return Err(ConfigError::GripperOutOfGrid);
        }

        let mut kinds = Vec::with_capacity(config.objects.len());
        for (i, o) in config.objects.iter().enumerate() {
            let kind = Kind::parse(&o.kind).ok_or_else(|| ConfigError::UnknownKind {
                id: o.id.clone(),
                kind: o.kind.clone(),
            })?;
            if !in_grid(o.cell) {
                return Err(ConfigError::OutOfGrid(o.id.clone()));
            }
            for other in &config.objects[..i] {
                if other.id == o.id {
                    return Err(ConfigError::DuplicateId(o.id.clone()));
                }
                if other.cell == o.cell {
                    return Err(ConfigError::OverlappingObjects(other.id.clone(), o.id.clone()));
                }
            }
            kinds.push(kind);
        }

        Ok(World {
            config,
            kinds,
            snapshots: BTreeMap::new(),
            next_snapshot: 0,
        })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    pub fn region(&self, zone: Zone) -> Option<Region> {
        self.config
            .zones
            .iter()
            .find(|z| z.zone == zone)
            .map(|z| z.region)
    }

    pub fn zone_of(&self, cell: Cell) -> Zone {
        self.config
            .zones
            .iter()
            .find(|z| z.region.contains(cell))
            .map(|z| z.zone)
            .unwrap_or(Zone::Table)
    }

    pub fn in_grid(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.config.grid && c.y < self.config.grid
    }

    pub fn reset(&self, seed: u64) -> SceneState {
        let objects = self
            .config
            .objects
            .iter()
            .zip(&self.kinds)
            .map(|(o, &kind)| ObjectInstance {
                id: o.id.clone(),
                kind,
                cell: o.cell,
                zone: self.zone_of(o.cell),
            })
            .collect();
        SceneState {
            step_index: 0,
            objects,
            gripper: GripperState {
                cell: self.config.gripper_start,
                holding: None,
            },
            rng_state: rng::stream(seed, "world", 0),
        }
    }

    /// Advance one step.
    pub fn apply_primitive(
        &self,
        state: &SceneState,
        action: &PrimitiveAction,
        noise: FaultDraw,
    ) -> (SceneState, StepOutcome) {
        let mut next = state.clone();
        next.step_index += 1;
        let outcome = match action {
            PrimitiveAction::Noop => StepOutcome::noop(),
            PrimitiveAction::MoveTo(target) => self.move_to(&mut next, *target, noise),
            PrimitiveAction::Grasp(id) => Self::grasp(&mut next, id),
            PrimitiveAction::Release => self.release(&mut next, noise),
        };
        (next, outcome)
    }

    fn move_to(&self, s: &mut SceneState, target: Cell, noise: FaultDraw) -> StepOutcome {
        let grid = self.config.grid;
        let target = Cell::new(target.x.clamp(0, grid - 1), target.y.clamp(0, grid - 1));
        let start = s.gripper.cell;
        s.gripper.cell = target;
        let mut out = StepOutcome {
            moved: start != target,
            ..Default::default()
        };
        if let Some(id) = s.gripper.holding.clone() {
            let drop_at = (noise == FaultDraw::DropEarly).then(|| start.midpoint(target));
            let zone = drop_at.map(|c| self.zone_of(c));
            let obj = s
                .objects
                .iter_mut()
                .find(|o| o.id == id)
                .expect("held object exists");
            match (drop_at, zone) {
                (Some(cell), Some(zone)) => {
                    obj.cell = cell;
                    obj.zone = zone;
                    s.gripper.holding = None;
                    out.dropped = true;
                }
                _ => obj.cell = target,
            }
        }
        if !out.moved && !out.dropped {
            out.noop = true;
        }
        out
    }

    fn grasp(s: &mut SceneState, id: &str) -> StepOutcome {
        if s.gripper.holding.is_some() {
            return StepOutcome::noop();
        }
        let cell = s.gripper.cell;
        match s.objects.iter_mut().find(|o| o.id == id) {
            Some(obj) if !obj.kind.is_fixture() && obj.cell == cell && obj.zone != Zone::Gripper => {
                obj.zone = Zone::Gripper;
                s.gripper.holding = Some(obj.id.clone());
                StepOutcome {
                    grasped: true,
                    ..Default::default()
                }
            }
            _ => StepOutcome::noop(),
        }
    }

    fn release(&self, s: &mut SceneState, noise: FaultDraw) -> StepOutcome {
        let Some(id) = s.gripper.holding.take() else {
            return StepOutcome::noop();
        };
        let mut cell = s.gripper.cell;
        if noise == FaultDraw::NearMissPlace {
            if let Some(region) = self
                .config
                .zones
                .iter()
                .find(|z| z.region.contains(cell))
                .map(|z| z.region)
            {
                let candidates: Vec<Cell> = (0..self.config.grid)
                    .flat_map(|y| (0..self.config.grid).map(move |x| Cell::new(x, y)))
                    .filter(|c| region.distance(*c) == 1 && self.zone_of(*c) == Zone::Table)
                    .collect();
                if !candidates.is_empty() {
                    let i = s.rng_state.random_range(0..candidates.len());
                    cell = candidates[i];
                }
            }
        }
        let zone = self.zone_of(cell);
        let obj = s
            .objects
            .iter_mut()
            .find(|o| o.id == id)
            .expect("held object exists");
        obj.cell = cell;
        obj.zone = zone;
        StepOutcome {
            released: true,
            ..Default::default()
        }
    }

    /// Observation from one camera. Pure in `state`.
    pub fn render(&self, state: &SceneState, camera: CameraId) -> Frame {
        let gripper = state.gripper.cell;
        let visible = |o: &ObjectInstance| match camera {
            CameraId::Top => true,
            CameraId::Wrist => o.cell.chebyshev(gripper) <= self.config.wrist_radius,
            CameraId::Front => !self.config.occlusions.iter().any(|occ| {
                occ.hidden == o.cell
                    && state
                        .objects
                        .iter()
                        .any(|p| p.id != o.id && p.cell == occ.occluder)
            }),
        };
        Frame {
            step_index: state.step_index,
            camera_id: camera,
            gripper,
            visible_objects: state
                .objects
                .iter()
                .filter(|o| visible(o))
                .map(|o| VisibleObject {
                    id: o.id.clone(),
                    kind: o.kind,
                    cell: o.cell,
                    zone: o.zone,
                })
                .collect(),
            held: state.gripper.holding.clone(),
            image_ref: None,
        }
    }

    pub fn snapshot(&mut self, state: &SceneState) -> SnapshotId {
        let id = SnapshotId(self.next_snapshot);
        self.next_snapshot += 1;
        self.snapshots.insert(id, state.clone());
        id
    }

    pub fn restore(&self, id: SnapshotId) -> Result<SceneState, SnapshotError> {
        self.snapshots
            .get(&id)
            .cloned()
            .ok_or(SnapshotError::Unknown(id))
    }

    /// Drop a snapshot that can no longer be restored.
    pub fn discard(&mut self, id: SnapshotId) {
        self.snapshots.remove(&id);
    }

    /// First free cell of a zone region in row-major order, or its corner.
    pub fn free_cell_in(&self, state: &SceneState, zone: Zone) -> Option<Cell> {
        let region = self.region(zone)?;
        let occupied = |c: Cell| {
            state
                .objects
                .iter()
                .any(|o| !o.kind.is_fixture() && o.zone != Zone::Gripper && o.cell == c)
        };
        let free = region.cells().find(|c| !occupied(*c));
        Some(free.unwrap_or(region.min))
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};

use super::geometry::{Pose, RigidTransform, Vec3};
use super::interpolate_pose;
use crate::error::{Error, Result};

/// HDMap entity classes of the release taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapClass {
    LaneLine,
    Lane,
    RoadBoundary,
    Pole,
    WaitLine,
    Crosswalk,
    RoadMarking,
    TrafficLight,
    TrafficSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryKind {
    Polyline,
    Polygon,
    Cuboid,
}

impl MapClass {
    pub const ALL: [MapClass; 9] = [
        MapClass::LaneLine,
        MapClass::Lane,
        MapClass::RoadBoundary,
        MapClass::Pole,
        MapClass::WaitLine,
        MapClass::Crosswalk,
        MapClass::RoadMarking,
        MapClass::TrafficLight,
        MapClass::TrafficSign,
    ];

    pub fn geometry_kind(self) -> GeometryKind {
        match self {
            MapClass::LaneLine
            | MapClass::Lane
            | MapClass::RoadBoundary
            | MapClass::Pole
            | MapClass::WaitLine => GeometryKind::Polyline,
            MapClass::Crosswalk | MapClass::RoadMarking => GeometryKind::Polygon,
            MapClass::TrafficLight | MapClass::TrafficSign => GeometryKind::Cuboid,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MapClass::LaneLine => "lane_line",
            MapClass::Lane => "lane",
            MapClass::RoadBoundary => "road_boundary",
            MapClass::Pole => "pole",
            MapClass::WaitLine => "wait_line",
            MapClass::Crosswalk => "crosswalk",
            MapClass::RoadMarking => "road_marking",
            MapClass::TrafficLight => "traffic_light",
            MapClass::TrafficSign => "traffic_sign",
        }
    }

    pub fn parse(s: &str) -> Option<MapClass> {
        MapClass::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for MapClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Categories of annotated dynamic objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectCategory {
    Automobile,
    HeavyTruck,
    Bus,
    TrainOrTram,
    TrolleyBus,
    OtherVehicle,
    Trailer,
    Person,
    Stroller,
    Rider,
    Animal,
    ProtrudingObject,
}

impl ObjectCategory {
    pub const ALL: [ObjectCategory; 12] = [
        ObjectCategory::Automobile,
        ObjectCategory::HeavyTruck,
        ObjectCategory::Bus,
        ObjectCategory::TrainOrTram,
        ObjectCategory::TrolleyBus,
        ObjectCategory::OtherVehicle,
        ObjectCategory::Trailer,
        ObjectCategory::Person,
        ObjectCategory::Stroller,
        ObjectCategory::Rider,
        ObjectCategory::Animal,
        ObjectCategory::ProtrudingObject,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectCategory::Automobile => "automobile",
            ObjectCategory::HeavyTruck => "heavy_truck",
            ObjectCategory::Bus => "bus",
            ObjectCategory::TrainOrTram => "train_or_tram",
            ObjectCategory::TrolleyBus => "trolley_bus",
            ObjectCategory::OtherVehicle => "other_vehicle",
            ObjectCategory::Trailer => "trailer",
            ObjectCategory::Person => "person",
            ObjectCategory::Stroller => "stroller",
            ObjectCategory::Rider => "rider",
            ObjectCategory::Animal => "animal",
            ObjectCategory::ProtrudingObject => "protruding_object",
        }
    }

    pub fn parse(s: &str) -> Option<ObjectCategory> {
        ObjectCategory::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for ObjectCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Oriented box. `dimensions` are full extents (length along local x,
/// width along local y, height along local z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub center: RigidTransform,
    pub dimensions: Vec3,
}

impl Cuboid {
    pub fn new(center: RigidTransform, dimensions: Vec3) -> Result<Self> {
        let c = Cuboid { center, dimensions };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.is_finite() || !self.dimensions.is_finite() {
            return Err(Error::Invariant("cuboid has non-finite fields".into()));
        }
        if self.dimensions.x <= 0.0 || self.dimensions.y <= 0.0 || self.dimensions.z <= 0.0 {
            return Err(Error::Invariant(format!(
                "cuboid dimensions must be positive, got {:?}",
                self.dimensions
            )));
        }
        self.center.rotation.check_unit()
    }

    /// The 8 world-frame corners, z-major: index bits are (z, y, x) with a
    /// clear bit meaning the negative half extent.
    pub fn corners(&self) -> [Vec3; 8] {
        let h = self.dimensions.scale(0.5);
        let mut out = [Vec3::ZERO; 8];
        for (i, c) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -h.x } else { h.x };
            let sy = if i & 2 == 0 { -h.y } else { h.y };
            let sz = if i & 4 == 0 { -h.z } else { h.z };
            *c = self.center.apply(Vec3::new(sx, sy, sz));
        }
        out
    }
}

/// Corner index quadruples of the six faces, each wound consistently.
pub const CUBOID_FACES: [[usize; 4]; 6] = [
    [0, 1, 3, 2], // bottom
    [4, 5, 7, 6], // top
    [0, 1, 5, 4], // -y
    [2, 3, 7, 6], // +y
    [0, 2, 6, 4], // -x
    [1, 3, 7, 5], // +x
];

/// Corner index pairs of the twelve edges.
pub const CUBOID_EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [2, 3],
    [4, 5],
    [6, 7],
    [0, 2],
    [1, 3],
    [4, 6],
    [5, 7],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Corners of a cuboid state in world frame.
pub fn cuboid_corners(state: &CuboidState) -> [Vec3; 8] {
    state.cuboid.corners()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Polyline { vertices: Vec<Vec3> },
    Polygon { vertices: Vec<Vec3> },
    Cuboid(Cuboid),
}

impl Geometry {
    pub fn kind(&self) -> GeometryKind {
        match self {
            Geometry::Polyline { .. } => GeometryKind::Polyline,
            Geometry::Polygon { .. } => GeometryKind::Polygon,
            Geometry::Cuboid(_) => GeometryKind::Cuboid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MapEntityRecord {
    id: String,
    class: MapClass,
    geometry: Geometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapEntityRecord", into = "MapEntityRecord")]
pub struct MapEntity {
    id: String,
    class: MapClass,
    geometry: Geometry,
}

impl TryFrom<MapEntityRecord> for MapEntity {
    type Error = Error;
    fn try_from(r: MapEntityRecord) -> Result<Self> {
        MapEntity::new(r.id, r.class, r.geometry)
    }
}

impl From<MapEntity> for MapEntityRecord {
    fn from(e: MapEntity) -> Self {
        MapEntityRecord {
            id: e.id,
            class: e.class,
            geometry: e.geometry,
        }
    }
}

impl MapEntity {
    pub fn new(id: impl Into<String>, class: MapClass, geometry: Geometry) -> Result<Self> {
        let id = id.into();
        if geometry.kind() != class.geometry_kind() {
            return Err(Error::Invariant(format!(
                "entity {id}: class {class} requires {:?} geometry, got {:?}",
                class.geometry_kind(),
                geometry.kind()
            )));
        }
        match &geometry {
            Geometry::Polyline { vertices } => {
                if vertices.len() < 2 {
                    return Err(Error::Invariant(format!(
                        "entity {id}: polyline needs at least 2 vertices"
                    )));
                }
                check_finite(&id, vertices)?;
            }
            Geometry::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::Invariant(format!(
                        "entity {id}: polygon needs at least 3 vertices"
                    )));
                }
                check_finite(&id, vertices)?;
                if polygon_self_intersects(vertices) {
                    return Err(Error::Invariant(format!(
                        "entity {id}: polygon is self-intersecting"
                    )));
                }
            }
            Geometry::Cuboid(c) => c
                .validate()
                .map_err(|e| Error::Invariant(format!("entity {id}: {e}")))?,
        }
        Ok(Self { id, class, geometry })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn class(&self) -> MapClass {
        self.class
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Applies a rigid change of coordinates to every vertex.
    pub fn transformed(&self, f: impl Fn(Vec3) -> Vec3, rot: impl Fn(&Cuboid) -> Cuboid) -> Result<Self> {
        let geometry = match &self.geometry {
            Geometry::Polyline { vertices } => Geometry::Polyline {
                vertices: vertices.iter().copied().map(&f).collect(),
            },
            Geometry::Polygon { vertices } => Geometry::Polygon {
                vertices: vertices.iter().copied().map(&f).collect(),
            },
            Geometry::Cuboid(c) => Geometry::Cuboid(rot(c)),
        };
        MapEntity::new(self.id.clone(), self.class, geometry)
    }
}

fn check_finite(id: &str, vertices: &[Vec3]) -> Result<()> {
    if vertices.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Invariant(format!("entity {id}: non-finite vertex")))
    }
}

/// Tests the closed ring for crossings between non-adjacent edges, using the
/// projection onto the dominant plane of the polygon.
pub fn polygon_self_intersects(vertices: &[Vec3]) -> bool {
    let n = vertices.len();
    if n < 4 {
        return false;
    }
    // Newell normal picks the projection plane.
    let mut normal = Vec3::ZERO;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        normal.x += (a.y - b.y) * (a.z + b.z);
        normal.y += (a.z - b.z) * (a.x + b.x);
        normal.z += (a.x - b.x) * (a.y + b.y);
    }
    let (ax, ay, az) = (normal.x.abs(), normal.y.abs(), normal.z.abs());
    let p: Vec<(f64, f64)> = vertices
        .iter()
        .map(|v| {
            if az >= ax && az >= ay {
                (v.x, v.y)
            } else if ax >= ay {
                (v.y, v.z)
            } else {
                (v.x, v.z)
            }
        })
        .collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    fn orient(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> f64 {
        (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
    }
    fn on_segment(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> bool {
        r.0 >= p.0.min(q.0) && r.0 <= p.0.max(q.0) && r.1 >= p.1.min(q.1) && r.1 <= p.1.max(q.1)
    }
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Cuboid of a tracked object at one timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuboidState {
    pub timestamp: f64,
    #[serde(flatten)]
    pub cuboid: Cuboid,
}

impl CuboidState {
    pub fn pose(&self) -> Pose {
        Pose::new(
            self.cuboid.center.translation,
            self.cuboid.center.rotation,
            self.timestamp,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ObjectTrackRecord {
    id: String,
    category: ObjectCategory,
    states: Vec<CuboidState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObjectTrackRecord", into = "ObjectTrackRecord")]
pub struct ObjectTrack {
    id: String,
    category: ObjectCategory,
    states: Vec<CuboidState>,
}

impl TryFrom<ObjectTrackRecord> for ObjectTrack {
    type Error = Error;
    fn try_from(r: ObjectTrackRecord) -> Result<Self> {
        ObjectTrack::new(r.id, r.category, r.states)
    }
}

impl From<ObjectTrack> for ObjectTrackRecord {
    fn from(t: ObjectTrack) -> Self {
        ObjectTrackRecord {
            id: t.id,
            category: t.category,
            states: t.states,
        }
    }
}

impl ObjectTrack {
    pub fn new(
        id: impl Into<String>,
        category: ObjectCategory,
        states: Vec<CuboidState>,
    ) -> Result<Self> {
        let id = id.into();
        if states.is_empty() {
            return Err(Error::Invariant(format!("track {id}: no states")));
        }
        for s in &states {
            if !s.timestamp.is_finite() {
                return Err(Error::Invariant(format!("track {id}: non-finite timestamp")));
            }
            s.cuboid
                .validate()
                .map_err(|e| Error::Invariant(format!("track {id}: {e}")))?;
        }
        if states.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
            return Err(Error::Invariant(format!(
                "track {id}: timestamps not strictly increasing"
            )));
        }
        Ok(Self {
            id,
            category,
            states,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn category(&self) -> ObjectCategory {
        self.category
    }

    pub fn states(&self) -> &[CuboidState] {
        &self.states
    }

    pub fn span(&self) -> (f64, f64) {
        (
            self.states[0].timestamp,
            self.states[self.states.len() - 1].timestamp,
        )
    }

    /// The interpolated cuboid at `t`, or `None` when `t` is outside the
    /// track. A single-state track exists only at its own timestamp.
    pub fn state_at(&self, t: f64) -> Option<Cuboid> {
        let (start, end) = self.span();
        if t < start || t > end {
            return None;
        }
        if self.states.len() == 1 {
            return Some(self.states[0].cuboid);
        }
        let poses: Vec<Pose> = self.states.iter().map(CuboidState::pose).collect();
        let pose = interpolate_pose(&poses, t).ok()?;
        let i = match self
            .states
            .binary_search_by(|s| s.timestamp.total_cmp(&t))
        {
            Ok(i) => return Some(self.states[i].cuboid),
            Err(i) => i - 1,
        };
        let (a, b) = (&self.states[i], &self.states[i + 1]);
        let s = (t - a.timestamp) / (b.timestamp - a.timestamp);
        Some(Cuboid {
            center: pose.transform(),
            dimensions: a.cuboid.dimensions.lerp(b.cuboid.dimensions, s),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::geometry::Quaternion;
    use std::f64::consts::FRAC_PI_2;

    fn cube(center: Vec3, dims: Vec3, yaw: f64) -> CuboidState {
        CuboidState {
            timestamp: 0.0,
            cuboid: Cuboid::new(
                RigidTransform::new(center, Quaternion::from_yaw(yaw)),
                dims,
            )
            .unwrap(),
        }
    }

    #[test]
    fn unit_cube_corners() {
        let c = cuboid_corners(&cube(Vec3::ZERO, Vec3::new(2.0, 2.0, 2.0), 0.0));
        assert_eq!(c[0], Vec3::new(-1.0, -1.0, -1.0));
        assert_eq!(c[1], Vec3::new(1.0, -1.0, -1.0));
        assert_eq!(c[2], Vec3::new(-1.0, 1.0, -1.0));
        assert_eq!(c[7], Vec3::new(1.0, 1.0, 1.0));
        for p in c {
            assert_eq!(p.x.abs(), 1.0);
            assert_eq!(p.y.abs(), 1.0);
            assert_eq!(p.z.abs(), 1.0);
        }
    }

    #[test]
    fn yawed_cuboid_long_axis_along_world_y() {
        // Hand multiply: Rz(90°) maps (x, y, z) -> (-y, x, z).
        let c = cuboid_corners(&cube(Vec3::ZERO, Vec3::new(4.0, 2.0, 2.0), FRAC_PI_2));
        let local = [
            (-2.0, -1.0, -1.0),
            (2.0, -1.0, -1.0),
            (-2.0, 1.0, -1.0),
            (2.0, 1.0, -1.0),
            (-2.0, -1.0, 1.0),
            (2.0, -1.0, 1.0),
            (-2.0, 1.0, 1.0),
            (2.0, 1.0, 1.0),
        ];
        for (p, (x, y, z)) in c.iter().zip(local) {
            let expected = Vec3::new(-y, x, z);
            assert!((*p - expected).norm() < 1e-12, "{p:?} vs {expected:?}");
            assert!((p.y.abs() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn corners_translate_with_center() {
        let a = cuboid_corners(&cube(Vec3::ZERO, Vec3::new(2.0, 2.0, 2.0), 0.0));
        let b = cuboid_corners(&cube(Vec3::new(10.0, 0.0, 0.0), Vec3::new(2.0, 2.0, 2.0), 0.0));
        for (p, q) in a.iter().zip(b.iter()) {
            assert_eq!(*p + Vec3::new(10.0, 0.0, 0.0), *q);
        }
    }

    #[test]
    fn class_geometry_mismatch_rejected() {
        let line = Geometry::Polyline {
            vertices: vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)],
        };
        assert!(MapEntity::new("a", MapClass::Crosswalk, line.clone()).is_err());
        assert!(MapEntity::new("a", MapClass::LaneLine, line).is_ok());
        let one = Geometry::Polyline {
            vertices: vec![Vec3::ZERO],
        };
        assert!(MapEntity::new("b", MapClass::Pole, one).is_err());
    }

    #[test]
    fn bowtie_polygon_rejected() {
        let bowtie = Geometry::Polygon {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
        };
        assert!(MapEntity::new("x", MapClass::Crosswalk, bowtie).is_err());
        let square = Geometry::Polygon {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
        };
        assert!(MapEntity::new("x", MapClass::Crosswalk, square).is_ok());
    }

    #[test]
    fn deserialize_validates() {
        let bad = r#"{"id":"e","class":"traffic_light","geometry":{"kind":"polyline","vertices":[[0,0,0],[1,0,0]]}}"#;
        assert!(serde_json::from_str::<MapEntity>(bad).is_err());
        let bad_dims = r#"{"id":"t","category":"bus","states":[{"timestamp":0.0,"center":{"translation":[0,0,0],"quaternion":[1,0,0,0]},"dimensions":[0,1,1]}]}"#;
        assert!(serde_json::from_str::<ObjectTrack>(bad_dims).is_err());
    }

    #[test]
    fn track_interpolates_between_states() {
        let a = cube(Vec3::ZERO, Vec3::new(2.0, 2.0, 2.0), 0.0);
        let mut b = cube(Vec3::new(2.0, 0.0, 0.0), Vec3::new(4.0, 2.0, 2.0), 0.0);
        b.timestamp = 1.0;
        let t = ObjectTrack::new("o", ObjectCategory::Automobile, vec![a, b]).unwrap();
        let mid = t.state_at(0.5).unwrap();
        assert!((mid.center.translation.x - 1.0).abs() < 1e-12);
        assert!((mid.dimensions.x - 3.0).abs() < 1e-12);
        assert!(t.state_at(1.5).is_none());
    }
}

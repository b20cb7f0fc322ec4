//! Labelled object sets with a point cloud, synthetic scene generation, scene
//! and ontology files, and the semantic filter over labels.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, GeometryError, Point3};

pub const FORMAT_VERSION: u32 = 1;
/// Spacing of the sampled support surfaces.
pub const CLOUD_STEP: f64 = 0.01;
/// Tolerance for "object center is a cloud member".
pub const CLOUD_MEMBER_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {message}")]
    InvariantViolation { path: String, message: String },
    #[error("unsupported format_version {0} (expected {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("filter '{filter}' rejected: {message}")]
    FilterRejected { filter: String, message: String },
}

fn violation(path: impl Into<String>, message: impl Into<String>) -> SceneError {
    SceneError::InvariantViolation {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub label: String,
    #[serde(rename = "pos")]
    pub position: Point3,
}

impl ObjectEntry {
    pub fn new(label: impl Into<String>, position: Point3) -> Self {
        Self {
            label: label.into(),
            position,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneFile", into = "SceneFile")]
pub struct Scene {
    pub objects: Vec<ObjectEntry>,
    pub cloud: Vec<Point3>,
    pub camera: CameraIntrinsics,
    pub frame_tag: String,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    format_version: u32,
    camera: CameraIntrinsics,
    #[serde(default = "default_frame_tag")]
    frame_tag: String,
    objects: Vec<ObjectEntry>,
    cloud: Vec<Point3>,
}

fn default_frame_tag() -> String {
    "camera".into()
}

impl TryFrom<SceneFile> for Scene {
    type Error = SceneError;

    fn try_from(f: SceneFile) -> Result<Self, SceneError> {
        if f.format_version != FORMAT_VERSION {
            return Err(SceneError::UnsupportedVersion(f.format_version));
        }
        Scene::new(f.objects, f.cloud, f.camera, f.frame_tag)
    }
}

impl From<Scene> for SceneFile {
    fn from(s: Scene) -> Self {
        SceneFile {
            format_version: FORMAT_VERSION,
            camera: s.camera,
            frame_tag: s.frame_tag,
            objects: s.objects,
            cloud: s.cloud,
        }
    }
}

impl Scene {
    /// Validates labels, finiteness and cloud membership of every object center.
    pub fn new(
        objects: Vec<ObjectEntry>,
        cloud: Vec<Point3>,
        camera: CameraIntrinsics,
        frame_tag: String,
    ) -> Result<Self, SceneError> {
        for (i, o) in objects.iter().enumerate() {
            if o.label.trim().is_empty() {
                return Err(violation(format!("objects[{i}].label"), "label is empty"));
            }
            if !o.position.is_finite() {
                return Err(violation(
                    format!("objects[{i}].pos"),
                    "non-finite coordinate",
                ));
            }
        }
        if let Some(i) = cloud.iter().position(|p| !p.is_finite()) {
            return Err(violation(format!("cloud[{i}]"), "non-finite coordinate"));
        }
        for (i, o) in objects.iter().enumerate() {
            if !cloud
                .iter()
                .any(|p| p.distance(o.position) <= CLOUD_MEMBER_EPS)
            {
                return Err(violation(
                    format!("objects[{i}].pos"),
                    "object center is not a member of the cloud",
                ));
            }
        }
        Ok(Self {
            objects,
            cloud,
            camera,
            frame_tag,
        })
    }

    /// Object centers become cloud members automatically.
    pub fn with_surface(
        objects: Vec<ObjectEntry>,
        surface: Vec<Point3>,
        camera: CameraIntrinsics,
    ) -> Result<Self, SceneError> {
        let mut cloud: Vec<Point3> = objects.iter().map(|o| o.position).collect();
        cloud.extend(surface);
        Self::new(objects, cloud, camera, default_frame_tag())
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.objects.iter().map(|o| o.label.as_str()).collect()
    }

    pub fn find(&self, label: &str) -> Option<&ObjectEntry> {
        self.objects.iter().find(|o| o.label == label)
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scene serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), SceneError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Reads a scene file; serde's invariant errors are unwrapped back into
/// `InvariantViolation` / `UnsupportedVersion`.
pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    let text = std::fs::read_to_string(path)?;
    let file: SceneFile = serde_json::from_str(&text)?;
    Scene::try_from(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Point3,
    pub max: Point3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneKind {
    /// Drawer fronts on the vertical plane `z = origin.z`; `origin` is the
    /// center of drawer_0_0, columns grow along +x and rows along +y (down).
    DrawerGrid {
        rows: usize,
        cols: usize,
        spacing: f64,
        origin: Point3,
    },
    /// Fixed objects on a table whose surface passes through the lowest center.
    ToolBench { tools: Vec<ObjectEntry> },
    /// `n` objects with labels drawn from `labels`, uniform in `bounds`.
    Random {
        n: usize,
        labels: Vec<String>,
        bounds: Bounds,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(flatten)]
    pub kind: SceneKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub camera: CameraIntrinsics,
}

impl SceneSpec {
    pub fn drawer_grid(rows: usize, cols: usize, spacing: f64, origin: Point3) -> Self {
        Self {
            kind: SceneKind::DrawerGrid {
                rows,
                cols,
                spacing,
                origin,
            },
            seed: 0,
            camera: CameraIntrinsics::default(),
        }
    }

    pub fn tool_bench(tools: Vec<ObjectEntry>) -> Self {
        Self {
            kind: SceneKind::ToolBench { tools },
            seed: 0,
            camera: CameraIntrinsics::default(),
        }
    }

    pub fn random(n: usize, labels: Vec<String>, bounds: Bounds, seed: u64) -> Self {
        Self {
            kind: SceneKind::Random { n, labels, bounds },
            seed,
            camera: CameraIntrinsics::default(),
        }
    }
}

pub fn drawer_label(row: usize, col: usize) -> String {
    format!("drawer_{row}_{col}")
}

fn steps(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let n = ((hi - lo) / CLOUD_STEP).round().max(0.0) as usize;
    (0..=n).map(move |k| lo + k as f64 * CLOUD_STEP)
}

/// Horizontal table sampling at height `y` (camera y points down).
fn table(x: (f64, f64), z: (f64, f64), y: f64) -> Vec<Point3> {
    steps(x.0, x.1)
        .flat_map(|px| steps(z.0, z.1).map(move |pz| Point3::new(px, y, pz)))
        .collect()
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SceneError> {
    match &spec.kind {
        SceneKind::DrawerGrid {
            rows,
            cols,
            spacing,
            origin,
        } => {
            if rows * cols == 0 {
                return Err(SceneError::InvalidSpec(
                    "drawer grid needs rows * cols >= 1".into(),
                ));
            }
            if !(*spacing > 0.0 && spacing.is_finite()) || !origin.is_finite() {
                return Err(SceneError::InvalidSpec(format!(
                    "spacing must be positive, got {spacing}"
                )));
            }
            let objects: Vec<ObjectEntry> = (0..*rows)
                .flat_map(|r| {
                    (0..*cols).map(move |c| {
                        ObjectEntry::new(
                            drawer_label(r, c),
                            *origin + Point3::new(c as f64 * spacing, r as f64 * spacing, 0.0),
                        )
                    })
                })
                .collect();
            let half = spacing / 2.0;
            let (x0, x1) = (
                origin.x - half,
                origin.x + (*cols - 1) as f64 * spacing + half,
            );
            let (y0, y1) = (
                origin.y - half,
                origin.y + (*rows - 1) as f64 * spacing + half,
            );
            let face = steps(x0, x1)
                .flat_map(|x| steps(y0, y1).map(move |y| Point3::new(x, y, origin.z)))
                .collect();
            Scene::with_surface(objects, face, spec.camera)
        }
        SceneKind::ToolBench { tools } => {
            if tools.is_empty() {
                return Err(SceneError::InvalidSpec(
                    "tool bench needs at least one tool".into(),
                ));
            }
            let surface = support_table(tools, 0.2);
            Scene::with_surface(tools.clone(), surface, spec.camera)
        }
        SceneKind::Random { n, labels, bounds } => {
            if *n == 0 || labels.is_empty() {
                return Err(SceneError::InvalidSpec(
                    "random scene needs n >= 1 and a label pool".into(),
                ));
            }
            let (lo, hi) = (bounds.min, bounds.max);
            if !(lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z) {
                return Err(SceneError::InvalidSpec(
                    "bounds.min must not exceed bounds.max".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut uni = |a: f64, b: f64| if a < b { rng.random_range(a..b) } else { a };
            let objects: Vec<ObjectEntry> = (0..*n)
                .map(|_| {
                    let p = Point3::new(uni(lo.x, hi.x), uni(lo.y, hi.y), uni(lo.z, hi.z));
                    (p, uni(0.0, labels.len() as f64) as usize)
                })
                .map(|(p, k)| ObjectEntry::new(labels[k.min(labels.len() - 1)].clone(), p))
                .collect();
            let surface = table((lo.x, hi.x), (lo.z, hi.z), hi.y);
            Scene::with_surface(objects, surface, spec.camera)
        }
    }
}

/// A table under `objects` extending `margin` past their footprint.
fn support_table(objects: &[ObjectEntry], margin: f64) -> Vec<Point3> {
    let fold = |f: fn(f64, f64) -> f64, init: f64, g: fn(&Point3) -> f64| {
        objects.iter().map(|o| g(&o.position)).fold(init, f)
    };
    let x = (
        fold(f64::min, f64::INFINITY, |p| p.x) - margin,
        fold(f64::max, f64::NEG_INFINITY, |p| p.x) + margin,
    );
    let z = (
        fold(f64::min, f64::INFINITY, |p| p.z) - margin,
        fold(f64::max, f64::NEG_INFINITY, |p| p.z) + margin,
    );
    table(x, z, fold(f64::max, f64::NEG_INFINITY, |p| p.y))
}

/// Category to label patterns. A pattern ending in `*` matches by prefix.
/// Every label also belongs to its own category.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "OntologyFile", into = "OntologyFile")]
pub struct Ontology {
    categories: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Serialize, Deserialize)]
struct OntologyFile {
    format_version: u32,
    categories: BTreeMap<String, BTreeSet<String>>,
}

impl TryFrom<OntologyFile> for Ontology {
    type Error = SceneError;

    fn try_from(f: OntologyFile) -> Result<Self, SceneError> {
        if f.format_version != FORMAT_VERSION {
            return Err(SceneError::UnsupportedVersion(f.format_version));
        }
        for (k, v) in &f.categories {
            if normalize(k).is_empty() || v.iter().any(|l| normalize(l).is_empty()) {
                return Err(violation(
                    format!("categories.{k}"),
                    "empty category or label",
                ));
            }
        }
        Ok(Ontology::from_categories(f.categories))
    }
}

impl From<Ontology> for OntologyFile {
    fn from(o: Ontology) -> Self {
        OntologyFile {
            format_version: FORMAT_VERSION,
            categories: o.categories,
        }
    }
}

/// Lowercase with spaces and hyphens folded to underscores.
pub fn normalize(label: &str) -> String {
    label.trim().to_lowercase().replace([' ', '-'], "_")
}

fn pattern_matches(pattern: &str, label: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(prefix) => label.starts_with(prefix),
        None => pattern == label,
    }
}

impl Ontology {
    pub fn from_categories<K, V, I>(categories: impl IntoIterator<Item = (K, I)>) -> Self
    where
        K: AsRef<str>,
        V: AsRef<str>,
        I: IntoIterator<Item = V>,
    {
        let categories = categories
            .into_iter()
            .map(|(k, v)| {
                (
                    normalize(k.as_ref()),
                    v.into_iter().map(|l| normalize(l.as_ref())).collect(),
                )
            })
            .collect();
        Self { categories }
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Categories for the generated scene kinds, used when no file is given.
    pub fn builtin() -> Self {
        Self::from_categories([
            ("drawer", vec!["drawer_*"]),
            (
                "tool",
                vec!["hammer", "screwdriver", "wirecutter", "wrench", "pliers"],
            ),
            ("jug", vec!["water jug"]),
            ("container", vec!["cup", "bowl", "water jug"]),
        ])
    }

    /// Whether `label` falls under the spoken `target`.
    pub fn covers(&self, target: &str, label: &str) -> bool {
        let (t, l) = (normalize(target), normalize(label));
        t == l
            || self
                .categories
                .get(&t)
                .is_some_and(|pats| pats.iter().any(|p| pattern_matches(p, &l)))
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }
}

/// Restricts an object list to the instances a spoken category can refer to.
pub trait SemanticFilter: Send + Sync {
    fn name(&self) -> &str;
    /// Must return a subsequence of `objects`.
    fn filter(&self, target: &str, objects: &[ObjectEntry])
        -> Result<Vec<ObjectEntry>, SceneError>;
}

/// The default, hermetic filter.
#[derive(Debug, Clone, Default)]
pub struct OntologyFilter {
    pub ontology: Ontology,
}

impl SemanticFilter for OntologyFilter {
    fn name(&self) -> &str {
        "ontology"
    }

    fn filter(
        &self,
        target: &str,
        objects: &[ObjectEntry],
    ) -> Result<Vec<ObjectEntry>, SceneError> {
        Ok(semantic_filter(target, &self.ontology, objects))
    }
}

/// Objects whose label is covered by `target`, in input order.
pub fn semantic_filter(
    target: &str,
    ontology: &Ontology,
    objects: &[ObjectEntry],
) -> Vec<ObjectEntry> {
    objects
        .iter()
        .filter(|o| ontology.covers(target, &o.label))
        .cloned()
        .collect()
}

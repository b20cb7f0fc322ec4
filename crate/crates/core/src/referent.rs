//! Resolving a pointing hand to the object, location or direction it refers to.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{pointing_ray, ray_point_distance, GeometryError, Point3, Ray, GEOM_EPS};
use crate::gesture::{HandKeypoints, PALM};
use crate::scene::{ObjectEntry, Ontology, OntologyFilter, Scene, SceneError, SemanticFilter};

/// Distances within this of the minimum count as tied.
pub const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ReferentError {
    #[error("no '{0}' among the scene objects")]
    NoCandidates(String),
    #[error("the scene has an empty point cloud")]
    EmptyCloud,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Filter(#[from] SceneError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Referent {
    Object(ObjectEntry),
    Location(Point3),
    Direction(Point3),
}

impl Referent {
    pub fn direction(v: Point3) -> Result<Self, GeometryError> {
        let n = v.norm();
        if (n - 1.0).abs() > GEOM_EPS {
            return Err(GeometryError::NonUnitDirection(n));
        }
        Ok(Referent::Direction(v))
    }

    pub fn position(&self) -> Option<Point3> {
        match self {
            Referent::Object(o) => Some(o.position),
            Referent::Location(p) => Some(*p),
            Referent::Direction(_) => None,
        }
    }
}

/// Index of the minimum-distance item; near-ties go to the smaller `key`.
fn argmin_by<T>(
    items: &[T],
    dist: impl Fn(&T) -> f64,
    key: impl Fn(&T, &T) -> Ordering,
) -> Option<usize> {
    let d: Vec<f64> = items.iter().map(&dist).collect();
    let best = d.iter().copied().fold(f64::INFINITY, f64::min);
    (0..items.len())
        .filter(|&i| d[i] <= best + TIE_EPS)
        .min_by(|&a, &b| key(&items[a], &items[b]))
}

/// Closest candidate to `ray` with the label-then-coordinates tie rule.
pub fn nearest_object<'a>(ray: &Ray, candidates: &'a [ObjectEntry]) -> Option<&'a ObjectEntry> {
    argmin_by(
        candidates,
        |o| ray_point_distance(ray, o.position),
        |a, b| {
            a.label
                .cmp(&b.label)
                .then_with(|| a.position.lex_cmp(&b.position))
        },
    )
    .map(|i| &candidates[i])
}

/// Filters by spoken category, then picks the instance nearest the pointing ray.
pub fn resolve_object(
    scene: &Scene,
    hand: &HandKeypoints,
    target: &str,
    ontology: &Ontology,
) -> Result<ObjectEntry, ReferentError> {
    resolve_object_with(
        scene,
        hand,
        target,
        &OntologyFilter {
            ontology: ontology.clone(),
        },
    )
}

pub fn resolve_object_with(
    scene: &Scene,
    hand: &HandKeypoints,
    target: &str,
    filter: &dyn SemanticFilter,
) -> Result<ObjectEntry, ReferentError> {
    let ray = pointing_ray(hand)?;
    let candidates = filter.filter(target, &scene.objects)?;
    nearest_object(&ray, &candidates)
        .cloned()
        .ok_or_else(|| ReferentError::NoCandidates(target.to_owned()))
}

/// Index into `scene.cloud` of the point nearest the pointing ray.
pub fn resolve_location_index(scene: &Scene, hand: &HandKeypoints) -> Result<usize, ReferentError> {
    let ray = pointing_ray(hand)?;
    argmin_by(
        &scene.cloud,
        |p| ray_point_distance(&ray, *p),
        |a, b| a.lex_cmp(b),
    )
    .ok_or(ReferentError::EmptyCloud)
}

pub fn resolve_location(scene: &Scene, hand: &HandKeypoints) -> Result<Point3, ReferentError> {
    Ok(scene.cloud[resolve_location_index(scene, hand)?])
}

pub fn resolve_direction(hand: &HandKeypoints) -> Result<Point3, ReferentError> {
    Ok(pointing_ray(hand)?.direction())
}

/// Palm centroid: wrist and the four finger MCPs.
pub fn hand_center(hand: &HandKeypoints) -> Point3 {
    PALM.iter()
        .fold(Point3::ORIGIN, |acc, &k| acc + hand.world[k])
        * (1.0 / PALM.len() as f64)
}

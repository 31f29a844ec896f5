//! GeoJSON export of a plan.
//!
//! One point per selected container and one line per non-empty route. Line
//! coordinates run depot, containers in visit order, depot, each as
//! `[lon, lat]`.

use std::collections::HashMap;

use fillroute_core::model::{Container, GeoPoint};
use geojson::{Feature, FeatureCollection, Geometry, JsonObject, JsonValue};
use serde_json::json;

use crate::error::{Error, Result};
use crate::plan::DayPlan;
use crate::store::Store;

fn position(p: GeoPoint) -> [f64; 2] {
    [p.lon, p.lat]
}

fn feature(geometry: Geometry, properties: JsonValue) -> Feature {
    let JsonValue::Object(properties) = properties else {
        unreachable!("properties are built as objects")
    };
    Feature {
        geometry: Some(geometry),
        properties: Some(properties),
        ..Default::default()
    }
}

pub fn export_geojson(plan: &DayPlan, store: &Store) -> Result<FeatureCollection> {
    export_with(plan, store.depot()?, &store.containers()?)
}

pub fn export_with(plan: &DayPlan, depot: GeoPoint, containers: &[Container]) -> Result<FeatureCollection> {
    let by_id: HashMap<&str, &Container> = containers.iter().map(|c| (c.id.as_str(), c)).collect();
    let locate = |id: &str| -> Result<GeoPoint> {
        by_id
            .get(id)
            .map(|c| c.location)
            .filter(GeoPoint::is_valid)
            .ok_or_else(|| Error::MissingCoordinates(id.to_string()))
    };
    if !depot.is_valid() {
        return Err(Error::MissingCoordinates("depot".into()));
    }
    let vehicle_of: HashMap<&str, &str> = plan
        .solution
        .routes
        .iter()
        .flat_map(|r| r.containers.iter().map(|c| (c.as_str(), r.vehicle_id.as_str())))
        .collect();

    let mut features = Vec::new();
    let selected = plan.selection.selected();
    for c in containers.iter().filter(|c| selected.contains(&c.id)) {
        let class = plan.selection.class_of(&c.id).map(|k| k.as_str());
        features.push(feature(
            Geometry::new_point(position(locate(&c.id)?)),
            json!({
                "kind": "container",
                "id": c.id,
                "fill": plan.selection.fills.get(&c.id),
                "class": class,
                "reason": plan.selection.reasons.get(&c.id).map(ToString::to_string),
                "small_only": c.small_only,
                "assigned": vehicle_of.contains_key(c.id.as_str()),
                "vehicle_id": vehicle_of.get(c.id.as_str()),
            }),
        ));
    }
    for r in plan.solution.routes.iter().filter(|r| !r.is_empty()) {
        let mut line = vec![position(depot)];
        for id in &r.containers {
            line.push(position(locate(id)?));
        }
        line.push(position(depot));
        features.push(feature(
            Geometry::new_line_string(line),
            json!({
                "kind": "route",
                "vehicle_id": r.vehicle_id,
                "container_ids": r.containers,
                "containers": r.containers.len(),
                "distance_m": r.total_distance_m,
                "duration_s": r.total_duration_s,
                "load_kg": r.total_load_kg,
            }),
        ));
    }

    let mut members = JsonObject::new();
    members.insert("plan_id".into(), json!(plan.plan_id));
    members.insert("date".into(), json!(plan.date));
    Ok(FeatureCollection {
        bbox: None,
        features,
        foreign_members: Some(members),
    })
}

/// Serialised export: pretty JSON with a trailing newline.
pub fn to_document(fc: &FeatureCollection) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(fc)?;
    out.push(b'\n');
    Ok(out)
}

/// `(vehicle_id, container ids)` of every route line, in document order.
pub fn route_orders(fc: &FeatureCollection) -> Vec<(String, Vec<String>)> {
    fc.features
        .iter()
        .filter(|f| f.property("kind").and_then(JsonValue::as_str) == Some("route"))
        .map(|f| {
            let vehicle = f.property("vehicle_id").and_then(JsonValue::as_str).unwrap_or_default();
            let ids = f
                .property("container_ids")
                .and_then(JsonValue::as_array)
                .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
                .unwrap_or_default();
            (vehicle.to_string(), ids)
        })
        .collect()
}

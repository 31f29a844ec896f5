//! Comma-delimited file formats (header row, UTF-8).
//!
//! | file       | columns |
//! |------------|---------|
//! | containers | `id,lat,lon,capacity_kg,unload_time_s,small_only,has_sensor,address,group` |
//! | vehicles   | `id,capacity_kg,small,cost_per_km,registration` |
//! | history    | `container_id,date,collected_kg,collected_yesterday` |
//! | sensors    | `container_id,date,fill` |
//! | forecasts  | `container_id,date,predicted_fill,model_tag` |
//! | baseline   | `vehicle_id,<container id>,<container id>,...` (one route per row) |
//! | trace      | `iteration,best_fitness` |
//!
//! Booleans are written as `true`/`false`; `yes`/`no`/`1`/`0` are accepted
//! on input.

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer};

use crate::error::{Error, Result};
use crate::model::{Container, FillRecord, Forecast, GeoPoint, ModelTag, Vehicle};

fn de_flag<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    let s = String::deserialize(d)?;
    parse_flag(&s).ok_or_else(|| serde::de::Error::custom(format!("not a boolean: {s:?}")))
}

pub fn parse_flag(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "y" | "1" => Some(true),
        "false" | "no" | "n" | "0" => Some(false),
        _ => None,
    }
}

fn f(v: f64) -> String {
    format!("{v}")
}

#[derive(Deserialize)]
struct ContainerRow {
    id: String,
    lat: f64,
    lon: f64,
    capacity_kg: f64,
    unload_time_s: f64,
    #[serde(deserialize_with = "de_flag")]
    small_only: bool,
    #[serde(deserialize_with = "de_flag")]
    has_sensor: bool,
    #[serde(default)]
    address: String,
    #[serde(default)]
    group: String,
}

pub fn read_containers<R: Read>(r: R) -> Result<Vec<Container>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize::<ContainerRow>()
        .map(|row| {
            let row = row?;
            Ok(Container {
                id: row.id,
                location: GeoPoint::new(row.lat, row.lon),
                capacity_kg: row.capacity_kg,
                unload_time_s: row.unload_time_s,
                small_only: row.small_only,
                has_sensor: row.has_sensor,
                address: row.address,
                group: row.group,
            })
        })
        .collect()
}

pub fn write_containers<W: Write>(w: W, containers: &[Container]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "id",
        "lat",
        "lon",
        "capacity_kg",
        "unload_time_s",
        "small_only",
        "has_sensor",
        "address",
        "group",
    ])?;
    for c in containers {
        wtr.write_record([
            c.id.clone(),
            f(c.location.lat),
            f(c.location.lon),
            f(c.capacity_kg),
            f(c.unload_time_s),
            c.small_only.to_string(),
            c.has_sensor.to_string(),
            c.address.clone(),
            c.group.clone(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct VehicleRow {
    id: String,
    capacity_kg: f64,
    #[serde(deserialize_with = "de_flag")]
    small: bool,
    cost_per_km: f64,
    #[serde(default)]
    registration: String,
}

pub fn read_vehicles<R: Read>(r: R) -> Result<Vec<Vehicle>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize::<VehicleRow>()
        .map(|row| {
            let row = row?;
            Ok(Vehicle {
                id: row.id,
                capacity_kg: row.capacity_kg,
                small: row.small,
                cost_per_km: row.cost_per_km,
                registration: row.registration,
            })
        })
        .collect()
}

pub fn write_vehicles<W: Write>(w: W, vehicles: &[Vehicle]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["id", "capacity_kg", "small", "cost_per_km", "registration"])?;
    for v in vehicles {
        wtr.write_record([
            v.id.clone(),
            f(v.capacity_kg),
            v.small.to_string(),
            f(v.cost_per_km),
            v.registration.clone(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct HistoryRow {
    container_id: String,
    date: NaiveDate,
    collected_kg: f64,
    #[serde(deserialize_with = "de_flag")]
    collected_yesterday: bool,
}

pub fn read_history<R: Read>(r: R) -> Result<Vec<FillRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize::<HistoryRow>()
        .map(|row| {
            let row = row?;
            Ok(FillRecord::new(
                row.container_id,
                row.date,
                row.collected_kg,
                row.collected_yesterday,
            ))
        })
        .collect()
}

pub fn write_history<W: Write>(w: W, records: &[FillRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["container_id", "date", "collected_kg", "collected_yesterday"])?;
    for r in records {
        wtr.write_record([
            r.container_id.clone(),
            r.date.to_string(),
            f(r.collected_kg),
            r.collected_yesterday.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// A direct fill measurement from a volumetric sensor.
#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
pub struct SensorReading {
    pub container_id: String,
    pub date: NaiveDate,
    pub fill: f64,
}

pub fn read_sensors<R: Read>(r: R) -> Result<Vec<SensorReading>> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_sensors<W: Write>(w: W, readings: &[SensorReading]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["container_id", "date", "fill"])?;
    for r in readings {
        wtr.write_record([r.container_id.clone(), r.date.to_string(), f(r.fill)])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct ForecastRow {
    container_id: String,
    date: NaiveDate,
    predicted_fill: f64,
    model_tag: ModelTag,
}

/// Reads a forecast export. The overflow flag is not part of the file and is
/// reconstructed as `predicted_fill >= 1`.
pub fn read_forecasts<R: Read>(r: R) -> Result<Vec<Forecast>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize::<ForecastRow>()
        .map(|row| {
            let row = row?;
            Ok(Forecast {
                container_id: row.container_id,
                date: row.date,
                predicted_fill: row.predicted_fill,
                overflow: row.predicted_fill >= 1.0,
                model_tag: row.model_tag,
            })
        })
        .collect()
}

pub fn write_forecasts<W: Write>(w: W, forecasts: &[Forecast]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["container_id", "date", "predicted_fill", "model_tag"])?;
    for fc in forecasts {
        wtr.write_record([
            fc.container_id.clone(),
            fc.date.to_string(),
            f(fc.predicted_fill),
            fc.model_tag.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// An externally supplied route: vehicle id plus ordered container ids.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, Deserialize)]
pub struct BaselineRoute {
    pub vehicle_id: String,
    pub containers: Vec<String>,
}

pub fn read_baseline<R: Read>(r: R) -> Result<Vec<BaselineRoute>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r);
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut cells = rec.iter().map(str::trim).filter(|c| !c.is_empty());
        let Some(vehicle) = cells.next() else { continue };
        if k == 0 && vehicle == "vehicle_id" {
            continue;
        }
        out.push(BaselineRoute {
            vehicle_id: vehicle.to_string(),
            containers: cells.map(String::from).collect(),
        });
    }
    Ok(out)
}

pub fn write_baseline<W: Write>(w: W, routes: &[BaselineRoute]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(w);
    wtr.write_record(["vehicle_id", "container_ids"])?;
    for r in routes {
        let mut rec = vec![r.vehicle_id.as_str()];
        rec.extend(r.containers.iter().map(String::as_str));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(w: W, trace: &[f64]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["iteration", "best_fitness"])?;
    for (k, v) in trace.iter().enumerate() {
        wtr.write_record([k.to_string(), f(*v)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a trace export back into per-iteration best fitness values.
pub fn read_trace<R: Read>(r: R) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            rec.get(1)
                .ok_or_else(|| Error::Parse("trace row without fitness".into()))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad fitness: {e}")))
        })
        .collect()
}

//! Distance/duration matrix construction and loading.
//!
//! Matrices come from a [`MatrixProvider`]. The synthetic provider
//! approximates road distance as great-circle distance times a detour factor;
//! [`TableProvider`] replays a previously loaded matrix. The triangle
//! inequality is never assumed.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Container, CostMatrix, GeoPoint};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const DEFAULT_DETOUR_FACTOR: f64 = 1.4;
/// 30 km/h.
pub const DEFAULT_SPEED_MPS: f64 = 8.33;

pub const DISTANCE_FILE: &str = "distance.csv";
pub const DURATION_FILE: &str = "duration.csv";
pub const ID_ORDER_FILE: &str = "ids.txt";

/// Great-circle distance in meters.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// A node handed to a provider: `id` is `None` for the depot.
#[derive(Debug, Clone, Copy)]
pub struct Node<'a> {
    pub id: Option<&'a str>,
    pub location: GeoPoint,
}

/// Source of pairwise `(distance_m, duration_s)` values.
pub trait MatrixProvider: Sync {
    fn pair(&self, from: Node<'_>, to: Node<'_>) -> Result<(f64, f64)>;

    /// Whether the asymmetry factor of [`build_matrix`] applies to this
    /// provider's output.
    fn synthetic(&self) -> bool {
        false
    }
}

/// Detour-scaled haversine distances at a constant travel speed.
#[derive(Debug, Clone, Copy)]
pub struct HaversineProvider {
    pub detour_factor: f64,
    pub speed_mps: f64,
}

impl Default for HaversineProvider {
    fn default() -> Self {
        Self {
            detour_factor: DEFAULT_DETOUR_FACTOR,
            speed_mps: DEFAULT_SPEED_MPS,
        }
    }
}

impl MatrixProvider for HaversineProvider {
    fn pair(&self, from: Node<'_>, to: Node<'_>) -> Result<(f64, f64)> {
        let d = haversine_distance(from.location, to.location) * self.detour_factor;
        Ok((d, d / self.speed_mps))
    }

    fn synthetic(&self) -> bool {
        true
    }
}

/// Looks pairs up in an existing matrix by container id.
#[derive(Debug, Clone)]
pub struct TableProvider<'a> {
    pub matrix: &'a CostMatrix,
}

impl TableProvider<'_> {
    fn node_index(&self, node: Node<'_>) -> Result<usize> {
        match node.id {
            None => Ok(0),
            Some(id) => self
                .matrix
                .index_of(id)
                .ok_or_else(|| Error::UnknownContainer(id.to_string())),
        }
    }
}

impl MatrixProvider for TableProvider<'_> {
    fn pair(&self, from: Node<'_>, to: Node<'_>) -> Result<(f64, f64)> {
        let (i, j) = (self.node_index(from)?, self.node_index(to)?);
        Ok((self.matrix.distance(i, j), self.matrix.duration(i, j)))
    }
}

/// Builds the `(n+1)^2` matrices for `depot` followed by `containers`.
///
/// For synthetic providers every entry `(i, j)` with `i < j` is multiplied by
/// `asymmetry_factor` and durations are rescaled by the same factor, so
/// `factor = 1` leaves a symmetric provider symmetric.
pub fn build_matrix(
    depot: GeoPoint,
    containers: &[Container],
    provider: &dyn MatrixProvider,
    asymmetry_factor: f64,
) -> Result<CostMatrix> {
    if containers.is_empty() {
        return Err(Error::InvalidParameter("no containers to build a matrix for".into()));
    }
    if !(asymmetry_factor.is_finite() && asymmetry_factor > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "asymmetry factor must be positive, got {asymmetry_factor}"
        )));
    }
    let mut seen = HashSet::new();
    for c in containers {
        if !seen.insert(c.id.as_str()) {
            return Err(Error::DuplicateId(c.id.clone()));
        }
    }

    let nodes: Vec<Node<'_>> = std::iter::once(Node {
        id: None,
        location: depot,
    })
    .chain(containers.iter().map(|c| Node {
        id: Some(c.id.as_str()),
        location: c.location,
    }))
    .collect();
    let n = nodes.len();
    let factor = if provider.synthetic() { asymmetry_factor } else { 1.0 };

    let rows: Vec<Vec<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        return Ok((0.0, 0.0));
                    }
                    let (d, t) = provider.pair(nodes[i], nodes[j])?;
                    Ok(if i < j { (d * factor, t * factor) } else { (d, t) })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut distance = Vec::with_capacity(n * n);
    let mut duration = Vec::with_capacity(n * n);
    for (d, t) in rows.into_iter().flatten() {
        distance.push(d);
        duration.push(t);
    }
    let ids = containers.iter().map(|c| c.id.clone()).collect();
    CostMatrix::new(ids, distance, duration)
}

fn grid_to_csv(m: &CostMatrix, grid: &[f64]) -> String {
    let n = m.node_count();
    let mut out = String::with_capacity(n * n * 10);
    for row in grid.chunks(n) {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            // `Display` for f64 is the shortest representation that parses
            // back to the same bits.
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// Writes `distance.csv`, `duration.csv` and `ids.txt` into `dir`.
pub fn write_matrix(matrix: &CostMatrix, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(DISTANCE_FILE), grid_to_csv(matrix, matrix.distance_grid()))?;
    fs::write(dir.join(DURATION_FILE), grid_to_csv(matrix, matrix.duration_grid()))?;
    let mut ids = String::new();
    for id in matrix.ids() {
        ids.push_str(id);
        ids.push('\n');
    }
    fs::write(dir.join(ID_ORDER_FILE), ids)?;
    Ok(())
}

fn parse_grid(text: &str, what: &str) -> Result<(usize, Vec<f64>)> {
    let mut rows = 0;
    let mut cols = None;
    let mut values = Vec::new();
    for (r, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for (c, cell) in line.split(',').enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::InvalidMatrix(format!("{what}: unparsable entry ({r},{c}): {cell:?}"))
            })?;
            if v < 0.0 {
                return Err(Error::InvalidMatrix(format!("{what}: negative entry ({r},{c})")));
            }
            values.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(expected) if expected != count => {
                return Err(Error::InvalidMatrix(format!(
                    "{what}: row {r} has {count} columns, expected {expected}"
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    if cols != Some(rows) {
        return Err(Error::InvalidMatrix(format!(
            "{what}: grid is not square ({rows} rows, {} columns)",
            cols.unwrap_or(0)
        )));
    }
    Ok((rows, values))
}

pub fn parse_id_order(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

/// Parses matrix grids from in-memory text.
pub fn parse_matrix(distance: &str, duration: &str, id_order: Vec<String>) -> Result<CostMatrix> {
    let (nd, dist) = parse_grid(distance, "distance")?;
    let (nt, dur) = parse_grid(duration, "duration")?;
    if nd != nt {
        return Err(Error::InvalidMatrix(format!(
            "distance is {nd}x{nd} but duration is {nt}x{nt}"
        )));
    }
    if nd != id_order.len() + 1 {
        return Err(Error::InvalidMatrix(format!(
            "grid order {nd} does not match {} ids plus depot",
            id_order.len()
        )));
    }
    CostMatrix::new(id_order, dist, dur)
}

/// Loads a matrix from grid files and a sidecar id-order file.
pub fn load_matrix(distance_file: &Path, duration_file: &Path, id_order_file: &Path) -> Result<CostMatrix> {
    let ids = parse_id_order(&fs::read_to_string(id_order_file)?);
    parse_matrix(
        &fs::read_to_string(distance_file)?,
        &fs::read_to_string(duration_file)?,
        ids,
    )
}

/// Loads the three matrix files written by [`write_matrix`] from `dir`.
pub fn load_matrix_dir(dir: &Path) -> Result<CostMatrix> {
    load_matrix(
        &dir.join(DISTANCE_FILE),
        &dir.join(DURATION_FILE),
        &dir.join(ID_ORDER_FILE),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn container(id: &str, lat: f64, lon: f64) -> Container {
        Container {
            id: id.into(),
            location: GeoPoint::new(lat, lon),
            capacity_kg: 75.0,
            unload_time_s: 210.0,
            small_only: false,
            has_sensor: false,
            address: String::new(),
            group: String::new(),
        }
    }

    #[test]
    fn haversine_identical_points() {
        let p = GeoPoint::new(36.72, -4.42);
        assert_eq!(haversine_distance(p, p), 0.0);
    }

    #[test]
    fn haversine_one_hundredth_degree_of_latitude() {
        // Along a meridian the haversine reduces to R * dlat.
        let oracle = EARTH_RADIUS_M * (0.01f64).to_radians();
        let d = haversine_distance(GeoPoint::new(36.72, -4.42), GeoPoint::new(36.73, -4.42));
        assert!((d - oracle).abs() < 1.0, "{d} vs {oracle}");
        assert!((d - 1112.0).abs() < 1.0);
    }

    #[test]
    fn two_containers_give_a_three_by_three_matrix() {
        let cs = [container("A", 36.72, -4.42), container("B", 36.73, -4.41)];
        let m = build_matrix(GeoPoint::new(36.70, -4.40), &cs, &HaversineProvider::default(), 1.0).unwrap();
        assert_eq!(m.node_count(), 3);
        for i in 0..3 {
            assert_eq!(m.distance(i, i), 0.0);
            assert_eq!(m.duration(i, i), 0.0);
        }
        assert!(m.is_symmetric());
        let expect = m.distance(1, 2) / DEFAULT_SPEED_MPS;
        assert!((m.duration(1, 2) - expect).abs() < 1e-9);
    }

    #[test]
    fn asymmetry_factor_scales_upper_triangle() {
        let cs = [container("A", 36.72, -4.42), container("B", 36.73, -4.41)];
        let p = HaversineProvider::default();
        let m = build_matrix(GeoPoint::new(36.70, -4.40), &cs, &p, 1.2).unwrap();
        let base = haversine_distance(cs[0].location, cs[1].location) * DEFAULT_DETOUR_FACTOR;
        assert!((m.distance(2, 1) - base).abs() < 1e-9);
        assert!((m.distance(1, 2) - 1.2 * m.distance(2, 1)).abs() < 1e-9);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let cs = [container("A", 36.72, -4.42), container("A", 36.73, -4.41)];
        let err = build_matrix(GeoPoint::new(36.7, -4.4), &cs, &HaversineProvider::default(), 1.0);
        assert!(matches!(err, Err(Error::DuplicateId(_))));
    }

    #[test]
    fn zero_grid_is_valid() {
        let zeros = "0,0,0\n0,0,0\n0,0,0\n";
        let m = parse_matrix(zeros, zeros, vec!["A".into(), "B".into()]).unwrap();
        assert_eq!(m.node_count(), 3);
    }

    #[test]
    fn negative_entry_is_named() {
        let bad = "0,1,1\n1,0,-5\n1,1,0\n";
        let ok = "0,1,1\n1,0,1\n1,1,0\n";
        let err = parse_matrix(bad, ok, vec!["A".into(), "B".into()]).unwrap_err();
        assert!(err.to_string().contains("negative entry (1,2)"), "{err}");
    }

    #[test]
    fn non_square_and_mismatched_grids() {
        let ok = "0,1\n1,0\n";
        assert!(parse_matrix("0,1,2\n1,0,2\n", ok, vec!["A".into()]).is_err());
        let err = parse_matrix(ok, ok, vec!["A".into(), "B".into()]).unwrap_err();
        assert!(err.to_string().contains("does not match"));
    }

    #[test]
    fn table_provider_replays_matrix() {
        let cs = [container("A", 36.72, -4.42), container("B", 36.73, -4.41)];
        let depot = GeoPoint::new(36.7, -4.4);
        let m = build_matrix(depot, &cs, &HaversineProvider::default(), 1.3).unwrap();
        let replay = build_matrix(depot, &cs, &TableProvider { matrix: &m }, 1.3).unwrap();
        assert_eq!(replay, m);
    }
}

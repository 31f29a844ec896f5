//! Directory-backed store.
//!
//! ```text
//! <root>/containers.csv  vehicles.csv  history.csv  [sensors.csv]  depot.json
//! <root>/matrix/distance.csv  duration.csv  ids.txt
//! <root>/plans/<id>.json  <id>.trace.csv
//! <root>/runs.jsonl
//! ```
//!
//! Inputs are read on every call so edits on disk are picked up by the next
//! plan. Plan documents are immutable once written and `runs.jsonl` only
//! ever grows.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use fillroute_core::costmatrix::{self, DISTANCE_FILE, DURATION_FILE, ID_ORDER_FILE};
use fillroute_core::io::{self as cio, SensorReading};
use fillroute_core::model::{Container, CostMatrix, FillRecord, GeoPoint, Vehicle};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::plan::DayPlan;

pub const CONTAINERS_FILE: &str = "containers.csv";
pub const VEHICLES_FILE: &str = "vehicles.csv";
pub const HISTORY_FILE: &str = "history.csv";
pub const SENSORS_FILE: &str = "sensors.csv";
pub const DEPOT_FILE: &str = "depot.json";
pub const MATRIX_DIR: &str = "matrix";
pub const PLANS_DIR: &str = "plans";
pub const RUNS_FILE: &str = "runs.jsonl";

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seq: usize,
    pub plan_id: String,
    pub date: chrono::NaiveDate,
    pub fitness: f64,
    pub routed: usize,
    pub unassigned: usize,
    /// The plan document already existed and was left untouched.
    pub reused: bool,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    writer: Mutex<()>,
}

impl Store {
    /// Opens an existing store directory.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::MissingFile(format!("store directory {}", root.display())));
        }
        Ok(Self {
            root,
            writer: Mutex::new(()),
        })
    }

    /// Writes the input files of a new store, replacing any existing ones.
    pub fn create(
        root: impl Into<PathBuf>,
        depot: GeoPoint,
        containers: &[Container],
        vehicles: &[Vehicle],
        history: &[FillRecord],
    ) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        cio::write_containers(File::create(root.join(CONTAINERS_FILE))?, containers)?;
        cio::write_vehicles(File::create(root.join(VEHICLES_FILE))?, vehicles)?;
        cio::write_history(File::create(root.join(HISTORY_FILE))?, history)?;
        fs::write(root.join(DEPOT_FILE), serde_json::to_string_pretty(&depot)? + "\n")?;
        Self::open(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn input(&self, name: &str) -> Result<File> {
        let path = self.root.join(name);
        File::open(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(name.to_string()),
            _ => Error::Io(e),
        })
    }

    pub fn depot(&self) -> Result<GeoPoint> {
        Ok(serde_json::from_reader(BufReader::new(self.input(DEPOT_FILE)?))?)
    }

    pub fn containers(&self) -> Result<Vec<Container>> {
        Ok(cio::read_containers(self.input(CONTAINERS_FILE)?)?)
    }

    pub fn vehicles(&self) -> Result<Vec<Vehicle>> {
        Ok(cio::read_vehicles(self.input(VEHICLES_FILE)?)?)
    }

    pub fn history(&self) -> Result<Vec<FillRecord>> {
        Ok(cio::read_history(self.input(HISTORY_FILE)?)?)
    }

    /// Sensor readings, empty when the store has none.
    pub fn sensors(&self) -> Result<Vec<SensorReading>> {
        match self.input(SENSORS_FILE) {
            Ok(f) => Ok(cio::read_sensors(f)?),
            Err(Error::MissingFile(_)) => Ok(Vec::new()),
            Err(e) => Err(e),
        }
    }

    pub fn write_sensors(&self, readings: &[SensorReading]) -> Result<()> {
        cio::write_sensors(File::create(self.root.join(SENSORS_FILE))?, readings)?;
        Ok(())
    }

    pub fn matrix_dir(&self) -> PathBuf {
        self.root.join(MATRIX_DIR)
    }

    pub fn has_matrix(&self) -> bool {
        let dir = self.matrix_dir();
        [DISTANCE_FILE, DURATION_FILE, ID_ORDER_FILE].iter().all(|f| dir.join(f).is_file())
    }

    pub fn matrix(&self) -> Result<CostMatrix> {
        if !self.has_matrix() {
            return Err(Error::MissingMatrix(self.matrix_dir().display().to_string()));
        }
        Ok(costmatrix::load_matrix_dir(&self.matrix_dir())?)
    }

    pub fn write_matrix(&self, matrix: &CostMatrix) -> Result<()> {
        costmatrix::write_matrix(matrix, &self.matrix_dir())?;
        Ok(())
    }

    /// SHA-256 over every input file that is present, in a fixed order.
    pub fn input_digest(&self) -> Result<String> {
        let mut h = Sha256::new();
        let matrix = |f: &str| format!("{MATRIX_DIR}/{f}");
        let names = [
            CONTAINERS_FILE.to_string(),
            VEHICLES_FILE.to_string(),
            HISTORY_FILE.to_string(),
            SENSORS_FILE.to_string(),
            DEPOT_FILE.to_string(),
            matrix(DISTANCE_FILE),
            matrix(DURATION_FILE),
            matrix(ID_ORDER_FILE),
        ];
        for name in &names {
            let path = self.root.join(name);
            if !path.is_file() {
                continue;
            }
            let bytes = fs::read(&path)?;
            h.update(name.as_bytes());
            h.update([0]);
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        Ok(hex::encode(h.finalize()))
    }

    /// Held for the whole of a planning run so run history stays linear.
    pub(crate) fn lock_writer(&self) -> MutexGuard<'_, ()> {
        self.writer.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn plan_path(&self, id: &str) -> Result<PathBuf> {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(Error::PlanNotFound(id.to_string()));
        }
        Ok(self.root.join(PLANS_DIR).join(format!("{id}.json")))
    }

    fn trace_path(&self, id: &str) -> Result<PathBuf> {
        Ok(self.plan_path(id)?.with_extension("trace.csv"))
    }

    pub fn has_plan(&self, id: &str) -> bool {
        self.plan_path(id).map(|p| p.is_file()).unwrap_or(false)
    }

    /// Writes the plan and its trace unless a document with this id exists,
    /// then appends to the run log. Returns whether the plan was new.
    pub(crate) fn save_plan(&self, plan: &DayPlan, trace: &[f64]) -> Result<bool> {
        let path = self.plan_path(&plan.plan_id)?;
        let fresh = !path.is_file();
        if !fresh && fs::read(&path)? != plan.to_document()? {
            log::warn!("plan {} recomputed with different content; keeping the stored one", plan.plan_id);
        }
        if fresh {
            fs::create_dir_all(path.parent().expect("plans dir"))?;
            let trace_path = self.trace_path(&plan.plan_id)?;
            cio::write_trace(File::create(&trace_path)?, trace)?;
            // Written last and renamed so a reader never sees half a plan.
            let tmp = path.with_extension("json.tmp");
            fs::write(&tmp, plan.to_document()?)?;
            fs::rename(&tmp, &path)?;
        }
        let record = RunRecord {
            seq: self.runs()?.len(),
            plan_id: plan.plan_id.clone(),
            date: plan.date,
            fitness: plan.solution.fitness,
            routed: plan.solution.assigned_count(),
            unassigned: plan.solution.unassigned.len(),
            reused: !fresh,
        };
        let mut log = OpenOptions::new().create(true).append(true).open(self.root.join(RUNS_FILE))?;
        writeln!(log, "{}", serde_json::to_string(&record)?)?;
        Ok(fresh)
    }

    /// The stored plan document, byte for byte.
    pub fn plan_document(&self, id: &str) -> Result<Vec<u8>> {
        let path = self.plan_path(id)?;
        fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::PlanNotFound(id.to_string()),
            _ => Error::Io(e),
        })
    }

    pub fn load_plan(&self, id: &str) -> Result<DayPlan> {
        Ok(serde_json::from_slice(&self.plan_document(id)?)?)
    }

    pub fn load_trace(&self, id: &str) -> Result<Vec<f64>> {
        let path = self.trace_path(id)?;
        let f = File::open(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::PlanNotFound(id.to_string()),
            _ => Error::Io(e),
        })?;
        Ok(cio::read_trace(f)?)
    }

    pub fn runs(&self) -> Result<Vec<RunRecord>> {
        let f = match File::open(self.root.join(RUNS_FILE)) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut out = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line?;
            if !line.trim().is_empty() {
                out.push(serde_json::from_str(&line)?);
            }
        }
        Ok(out)
    }
}

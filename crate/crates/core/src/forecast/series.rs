//! Reconstruction of daily fill increments from sparse collection events.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use log::warn;

use crate::error::{Error, Result};
use crate::model::{Container, FillRateSeries, FillRecord};

/// Spreads each collected mass uniformly over the days since the previous
/// collection.
///
/// For a gap of `g` days closed by a collection of `k` kg every day in the
/// gap receives `(k / capacity_kg) / g`. Records of other containers are
/// ignored, records may arrive unsorted, masses above capacity are clamped
/// and several collections on the same day are folded into one.
pub fn derive_daily_rates(records: &[FillRecord], container: &Container) -> Result<FillRateSeries> {
    let mut days: BTreeMap<NaiveDate, (f64, bool)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.container_id == container.id) {
        let mut kg = r.collected_kg;
        if !(kg >= 0.0) {
            warn!("{}: negative collected mass {kg} on {} treated as 0", container.id, r.date);
            kg = 0.0;
        }
        if kg > container.capacity_kg {
            warn!(
                "{}: collected {kg} kg on {} exceeds capacity {} kg, clamped",
                container.id, r.date, container.capacity_kg
            );
            kg = container.capacity_kg;
        }
        let slot = days.entry(r.date).or_insert((0.0, false));
        slot.0 += kg;
        slot.1 |= r.collected_yesterday;
    }

    let Some((&first, _)) = days.iter().next() else {
        return Err(Error::InsufficientHistory(format!(
            "no collection records for container {}",
            container.id
        )));
    };
    if days.len() < 2 {
        return Err(Error::InsufficientHistory(format!(
            "container {} has a single collection day, at least two are needed",
            container.id
        )));
    }

    let start = first.succ_opt().expect("date overflow");
    let mut daily_rate = Vec::new();
    let mut collected_yesterday = Vec::new();
    let mut prev = first;
    for (&date, &(kg, flagged)) in days.iter().skip(1) {
        let gap = (date - prev).num_days() as usize;
        let rate = kg / container.capacity_kg / gap as f64;
        for k in 0..gap {
            daily_rate.push(rate);
            // The day after a collection, or the record's own flag on its day.
            collected_yesterday.push(k == 0 || (k == gap - 1 && flagged));
        }
        prev = date;
    }

    Ok(FillRateSeries {
        container_id: container.id.clone(),
        start_date: start,
        daily_rate,
        collected_yesterday,
    })
}

/// Collection days (dates with at least one record) of one container, sorted.
pub fn collection_days(records: &[FillRecord], container_id: &str) -> Vec<NaiveDate> {
    let mut days: Vec<NaiveDate> = records
        .iter()
        .filter(|r| r.container_id == container_id)
        .map(|r| r.date)
        .collect();
    days.sort_unstable();
    days.dedup();
    days
}

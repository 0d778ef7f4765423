//! Monthly generator inventory records: balancing-authority resolution,
//! entry/exit detection and capacity aggregation.
//!
//! CSV columns: `generator_id, plant_id, month (YYYY-MM), capacity_mw,
//! status, fuel_code, balancing_authority, latitude, longitude,
//! first_operation_date, retirement_date`. Empty fields are missing.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::boundary::Boundary;
use super::fuel::{FuelCategory, FuelMap};
use super::panel::Panel;
use super::Month;
use crate::error::{Error, Result};

/// Tolerance of the capacity accounting identity, in MW.
pub const ACCOUNTING_TOLERANCE: f64 = 0.05;

/// Smallest capacity kept in the sample, in MW.
pub const MIN_CAPACITY_MW: f64 = 1.0;

/// Generator status codes of the monthly inventory survey.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Operating,
    Standby,
    /// Out of service but expected back within the next calendar year.
    OutOfServiceReturning,
    OutOfService,
    Retired,
    /// Pre-operation phase 1 (planned, no approvals) through 6 (construction
    /// complete, not yet commercial).
    Applicant(u8),
    /// Cancelled, indefinitely postponed or otherwise inactive.
    Inactive,
}

impl Status {
    /// Statuses that count as entry.
    pub fn is_operating(self) -> bool {
        matches!(self, Status::Operating | Status::Standby)
    }

    /// Statuses that keep an operating unit in the market.
    pub fn is_active(self) -> bool {
        matches!(self, Status::Operating | Status::Standby | Status::OutOfServiceReturning)
    }

    pub fn applicant_phase(self) -> Option<u8> {
        match self {
            Status::Applicant(p) => Some(p),
            _ => None,
        }
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "OP" => Status::Operating,
            "SB" => Status::Standby,
            "OA" => Status::OutOfServiceReturning,
            "OS" => Status::OutOfService,
            "RE" => Status::Retired,
            "P" => Status::Applicant(1),
            "L" => Status::Applicant(2),
            "T" => Status::Applicant(3),
            "U" => Status::Applicant(4),
            "V" => Status::Applicant(5),
            "TS" => Status::Applicant(6),
            "CN" | "IP" | "OT" => Status::Inactive,
            other => return Err(format!("unrecognized status code `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub generator_id: String,
    pub plant_id: String,
    pub month: Month,
    pub capacity_mw: f64,
    pub status: String,
    pub fuel_code: String,
    #[serde(default)]
    pub balancing_authority: Option<String>,
    #[serde(default)]
    pub latitude: Option<f64>,
    #[serde(default)]
    pub longitude: Option<f64>,
    #[serde(default)]
    pub first_operation_date: Option<String>,
    #[serde(default)]
    pub retirement_date: Option<String>,
}

impl GeneratorRecord {
    fn key(&self) -> (String, String) {
        (self.plant_id.clone(), self.generator_id.clone())
    }
}

/// Read an inventory CSV. Records below [`MIN_CAPACITY_MW`] are dropped.
pub fn read_generators(path: &Path) -> Result<Vec<GeneratorRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<GeneratorRecord>() {
        let mut rec = row.map_err(|e| csv_error(path, e))?;
        if let Some(ba) = &rec.balancing_authority {
            if ba.trim().is_empty() {
                rec.balancing_authority = None;
            }
        }
        if !rec.capacity_mw.is_finite() {
            return Err(Error::InvalidInput(format!(
                "{}: generator {} has non-finite capacity",
                path.display(),
                rec.generator_id
            )));
        }
        if rec.capacity_mw >= MIN_CAPACITY_MW {
            out.push(rec);
        }
    }
    Ok(out)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::parse(path, line, format!("{kind:?}")),
    }
}

/// Outcome of filling missing balancing-authority codes.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub records: Vec<GeneratorRecord>,
    pub filled_from_plant: usize,
    pub filled_from_boundary: usize,
    pub excluded: usize,
}

impl Resolution {
    /// Records assigned to the given authority.
    pub fn in_authority(&self, code: &str) -> Vec<GeneratorRecord> {
        self.records
            .iter()
            .filter(|r| r.balancing_authority.as_deref() == Some(code))
            .cloned()
            .collect()
    }
}

/// Fill missing balancing-authority codes from the same plant (nearest future
/// observation first, otherwise the latest earlier one), then assign
/// `authority` to records located inside `boundary`. Records that remain
/// unassigned are excluded.
pub fn resolve_balancing_authority(
    records: &[GeneratorRecord],
    boundary: Option<&Boundary>,
    authority: &str,
) -> Result<Resolution> {
    let mut records = records.to_vec();
    records.sort_by(|a, b| (&a.plant_id, a.month).cmp(&(&b.plant_id, b.month)));

    let mut by_plant: HashMap<&str, BTreeMap<Month, String>> = HashMap::new();
    for r in &records {
        if let Some(ba) = &r.balancing_authority {
            by_plant
                .entry(r.plant_id.as_str())
                .or_default()
                .entry(r.month)
                .or_insert_with(|| ba.clone());
        }
    }
    let fills: Vec<Option<String>> = records
        .iter()
        .map(|r| {
            if r.balancing_authority.is_some() {
                return None;
            }
            let known = by_plant.get(r.plant_id.as_str())?;
            known
                .range(r.month..)
                .next()
                .or_else(|| known.range(..r.month).next_back())
                .map(|(_, ba)| ba.clone())
        })
        .collect();
    let mut filled_from_plant = 0;
    for (r, fill) in records.iter_mut().zip(fills) {
        if let Some(ba) = fill {
            r.balancing_authority = Some(ba);
            filled_from_plant += 1;
        }
    }

    let unresolved = records.iter().filter(|r| r.balancing_authority.is_none()).count();
    if unresolved > 0 && boundary.is_none() {
        return Err(Error::MissingBoundary { count: unresolved });
    }
    let mut filled_from_boundary = 0;
    let mut excluded = 0;
    let mut kept = Vec::with_capacity(records.len());
    for mut r in records {
        if r.balancing_authority.is_none() {
            let inside = match (boundary, r.longitude, r.latitude) {
                (Some(b), Some(lon), Some(lat)) => b.contains(lon, lat),
                _ => false,
            };
            if !inside {
                excluded += 1;
                continue;
            }
            r.balancing_authority = Some(authority.to_string());
            filled_from_boundary += 1;
        }
        kept.push(r);
    }
    Ok(Resolution {
        records: kept,
        filled_from_plant,
        filled_from_boundary,
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Entry,
    Exit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorEvent {
    pub plant_id: String,
    pub generator_id: String,
    pub month: Month,
    pub kind: EventKind,
    pub capacity_mw: f64,
    pub category: FuelCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSnapshot {
    pub plant_id: String,
    pub generator_id: String,
    pub capacity_mw: f64,
    pub category: FuelCategory,
}

/// Units active at the start and end of the window plus the events between.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryExit {
    pub first_month: Month,
    pub last_month: Month,
    pub initial: Vec<UnitSnapshot>,
    pub events: Vec<GeneratorEvent>,
    pub final_units: Vec<UnitSnapshot>,
    pub warnings: Vec<String>,
}

struct Track<'a> {
    unit: UnitSnapshot,
    /// (month, active) after each recognized record.
    states: Vec<(Month, bool)>,
    records: Vec<&'a GeneratorRecord>,
}

/// Per-generator activity paths. Capacity and category are fixed per unit
/// from its most recent record so that stage totals add up exactly.
fn track<'a>(records: &'a [GeneratorRecord], fuel: &FuelMap, first: Month, warnings: &mut Vec<String>) -> Vec<Track<'a>> {
    let mut units: BTreeMap<(String, String), Vec<&GeneratorRecord>> = BTreeMap::new();
    for r in records {
        units.entry(r.key()).or_default().push(r);
    }
    units
        .into_values()
        .map(|mut recs| {
            recs.sort_by_key(|r| r.month);
            let latest = recs[recs.len() - 1];
            let unit = UnitSnapshot {
                plant_id: latest.plant_id.clone(),
                generator_id: latest.generator_id.clone(),
                capacity_mw: latest.capacity_mw,
                category: fuel.category(&latest.fuel_code),
            };
            let mut active = false;
            let mut states = Vec::with_capacity(recs.len());
            for r in &recs {
                match r.status.parse::<Status>() {
                    Ok(status) => {
                        if r.month == first {
                            active = status.is_active();
                        } else if !active && status.is_operating() {
                            active = true;
                        } else if active && !status.is_active() {
                            active = false;
                        }
                        states.push((r.month, active));
                    }
                    Err(msg) => {
                        let w = format!("{}/{} {}: {msg}; state unchanged", r.plant_id, r.generator_id, r.month);
                        log::warn!("{w}");
                        warnings.push(w);
                    }
                }
            }
            Track {
                unit,
                states,
                records: recs,
            }
        })
        .collect()
}

fn window(records: &[GeneratorRecord]) -> Result<(Month, Month)> {
    let first = records.iter().map(|r| r.month).min();
    let last = records.iter().map(|r| r.month).max();
    match (first, last) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::EmptySample("no generator records".into())),
    }
}

/// Entry is the first month after the initial one with an operating or
/// stand-by status following an inactive spell; exit is the first month an
/// active unit reports a status outside operating, stand-by and
/// out-of-service-but-returning. Unrecognized statuses and months without a
/// record leave the state unchanged.
pub fn detect_entry_exit(records: &[GeneratorRecord], fuel: &FuelMap) -> Result<EntryExit> {
    let (first, last) = window(records)?;
    let mut warnings = Vec::new();
    let tracks = track(records, fuel, first, &mut warnings);
    let mut initial = Vec::new();
    let mut events = Vec::new();
    let mut final_units = Vec::new();
    for t in &tracks {
        let mut prev = false;
        for &(month, active) in &t.states {
            if month == first {
                if active {
                    initial.push(t.unit.clone());
                }
            } else if active != prev {
                events.push(GeneratorEvent {
                    plant_id: t.unit.plant_id.clone(),
                    generator_id: t.unit.generator_id.clone(),
                    month,
                    kind: if active { EventKind::Entry } else { EventKind::Exit },
                    capacity_mw: t.unit.capacity_mw,
                    category: t.unit.category,
                });
            }
            prev = active;
        }
        if prev {
            final_units.push(t.unit.clone());
            if t.records.last().map(|r| r.month) != Some(last) {
                let w = format!(
                    "{}/{} active but absent from {last}",
                    t.unit.plant_id, t.unit.generator_id
                );
                log::warn!("{w}");
                warnings.push(w);
            }
        }
    }
    events.sort_by(|a, b| (a.month, &a.plant_id, &a.generator_id).cmp(&(b.month, &b.plant_id, &b.generator_id)));
    Ok(EntryExit {
        first_month: first,
        last_month: last,
        initial,
        events,
        final_units,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Initial,
    Entrants,
    Exits,
    Final,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Initial, Stage::Entrants, Stage::Exits, Stage::Final];

    pub fn label(self) -> &'static str {
        match self {
            Stage::Initial => "Initial Period",
            Stage::Entrants => "Entrants",
            Stage::Exits => "Exits",
            Stage::Final => "Final Period",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub units: usize,
    pub unit_share: f64,
    pub mean_mw: f64,
    pub total_mw: f64,
    pub mw_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub stage: Stage,
    /// In the order of [`FuelCategory::ALL`].
    pub by_category: Vec<StageSummary>,
    pub total: StageSummary,
}

/// Counts, mean and total MW, and shares by stage and fuel category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryExitTable {
    pub rows: Vec<StageRow>,
}

impl EntryExitTable {
    pub fn get(&self, stage: Stage, category: Option<FuelCategory>) -> Option<&StageSummary> {
        let row = self.rows.iter().find(|r| r.stage == stage)?;
        match category {
            None => Some(&row.total),
            Some(c) => row.by_category.get(FuelCategory::ALL.iter().position(|&x| x == c)?),
        }
    }
}

fn summarize(units: &[(FuelCategory, f64)]) -> (Vec<StageSummary>, StageSummary) {
    let total_units = units.len();
    let total_mw: f64 = units.iter().map(|u| u.1).sum();
    let share = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::NAN };
    let by_category = FuelCategory::ALL
        .iter()
        .map(|&c| {
            let mws: Vec<f64> = units.iter().filter(|u| u.0 == c).map(|u| u.1).collect();
            let mw: f64 = mws.iter().sum();
            StageSummary {
                units: mws.len(),
                unit_share: share(mws.len() as f64, total_units as f64),
                mean_mw: share(mw, mws.len() as f64),
                total_mw: mw,
                mw_share: share(mw, total_mw),
            }
        })
        .collect();
    let total = StageSummary {
        units: total_units,
        unit_share: if total_units > 0 { 1.0 } else { f64::NAN },
        mean_mw: share(total_mw, total_units as f64),
        total_mw,
        mw_share: if total_units > 0 { 1.0 } else { f64::NAN },
    };
    (by_category, total)
}

/// Tabulate entry and exit by fuel category and enforce
/// `final = initial + entries - exits` per category.
pub fn tabulate_entry_exit(ee: &EntryExit) -> Result<EntryExitTable> {
    let pick = |units: &[UnitSnapshot]| units.iter().map(|u| (u.category, u.capacity_mw)).collect::<Vec<_>>();
    let of_kind = |k: EventKind| {
        ee.events
            .iter()
            .filter(|e| e.kind == k)
            .map(|e| (e.category, e.capacity_mw))
            .collect::<Vec<_>>()
    };
    let stages = [
        (Stage::Initial, pick(&ee.initial)),
        (Stage::Entrants, of_kind(EventKind::Entry)),
        (Stage::Exits, of_kind(EventKind::Exit)),
        (Stage::Final, pick(&ee.final_units)),
    ];
    let rows: Vec<StageRow> = stages
        .iter()
        .map(|(stage, units)| {
            let (by_category, total) = summarize(units);
            StageRow {
                stage: *stage,
                by_category,
                total,
            }
        })
        .collect();
    let table = EntryExitTable { rows };
    let categories = FuelCategory::ALL.iter().map(|&c| (c.label(), Some(c)));
    for (label, cat) in categories.chain([("Total", None)]) {
        let mw = |s| table.get(s, cat).map(|x| x.total_mw).unwrap_or(0.0);
        let (i, e, x, f) = (mw(Stage::Initial), mw(Stage::Entrants), mw(Stage::Exits), mw(Stage::Final));
        if (i + e - x - f).abs() > ACCOUNTING_TOLERANCE {
            return Err(Error::AccountingMismatch {
                category: label.to_string(),
                initial: i,
                entries: e,
                exits: x,
                final_total: f,
            });
        }
    }
    Ok(table)
}

/// Monthly generating capacity and applicant pool by fuel category.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyCapacity {
    pub months: Vec<Month>,
    /// Active capacity in MW, indexed `[category][month]`.
    pub generating: Vec<Vec<f64>>,
    /// Capacity in any applicant phase, in MW.
    pub applicant_pool: Vec<Vec<f64>>,
    /// Mean applicant phase (1-6) of pool units, missing when the pool is empty.
    pub mean_phase: Vec<Vec<f64>>,
}

impl MonthlyCapacity {
    /// Panel columns `gen_<cat>`, `pool_<cat>` and `phase_<cat>`.
    pub fn to_panel(&self) -> Panel {
        let mut panel = Panel::new(self.months.clone());
        for (k, c) in FuelCategory::ALL.iter().enumerate() {
            panel
                .insert(format!("gen_{}", c.slug()), self.generating[k].clone())
                .expect("lengths match");
            panel
                .insert(format!("pool_{}", c.slug()), self.applicant_pool[k].clone())
                .expect("lengths match");
            panel
                .insert(format!("phase_{}", c.slug()), self.mean_phase[k].clone())
                .expect("lengths match");
        }
        panel
    }
}

pub fn monthly_capacity(records: &[GeneratorRecord], fuel: &FuelMap) -> Result<MonthlyCapacity> {
    let (first, last) = window(records)?;
    let months: Vec<Month> = (first.ordinal()..=last.ordinal()).map(Month::from_ordinal).collect();
    let t = months.len();
    let idx = |m: Month| (m.ordinal() - first.ordinal()) as usize;
    let mut warnings = Vec::new();
    let mut generating = vec![vec![0.0; t]; 3];
    for tr in track(records, fuel, first, &mut warnings) {
        let k = FuelCategory::ALL.iter().position(|&c| c == tr.unit.category).expect("known category");
        let mut active = false;
        let mut next = tr.states.iter().peekable();
        for (m, slot) in generating[k].iter_mut().enumerate() {
            while let Some(&&(month, a)) = next.peek() {
                if idx(month) > m {
                    break;
                }
                active = a;
                next.next();
            }
            if active {
                *slot += tr.unit.capacity_mw;
            }
        }
    }
    let mut pool = vec![vec![0.0; t]; 3];
    let mut phase_sum = vec![vec![0.0; t]; 3];
    let mut phase_n = vec![vec![0usize; t]; 3];
    for r in records {
        if let Ok(Status::Applicant(p)) = r.status.parse::<Status>() {
            let k = FuelCategory::ALL.iter().position(|&c| c == fuel.category(&r.fuel_code)).expect("known category");
            let m = idx(r.month);
            pool[k][m] += r.capacity_mw;
            phase_sum[k][m] += p as f64;
            phase_n[k][m] += 1;
        }
    }
    let mean_phase = phase_sum
        .iter()
        .zip(&phase_n)
        .map(|(s, n)| s.iter().zip(n).map(|(s, &n)| if n > 0 { s / n as f64 } else { f64::NAN }).collect())
        .collect();
    Ok(MonthlyCapacity {
        months,
        generating,
        applicant_pool: pool,
        mean_phase,
    })
}

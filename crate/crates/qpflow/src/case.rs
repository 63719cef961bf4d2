//! MATPOWER-style case file ingestion.
//!
//! Supports the four blocks a power-flow study needs (`mpc.baseMVA`,
//! `mpc.bus`, `mpc.gen`, `mpc.branch`); comments, trailing columns, and
//! OPF-only blocks such as `gencost` are tolerated and ignored. Powers are
//! converted to per unit on parse. The canonical exchange format is a JSON
//! document mirroring [`CaseData`] field names.

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusType {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchStatus {
    On,
    Off,
}

/// One bus with its per-unit demand, shunt, and voltage setpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: i64,
    pub bus_type: BusType,
    pub p_demand: f64,
    pub q_demand: f64,
    pub shunt_gs: f64,
    pub shunt_bs: f64,
    /// Voltage magnitude setpoint (pu); meaningful for slack and pv buses.
    pub v_set: f64,
}

/// One branch of the Π model. `tap` is 1.0 when the file leaves it at 0,
/// `shift` is stored in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub from_bus: i64,
    pub to_bus: i64,
    pub r: f64,
    pub x: f64,
    pub b_charge: f64,
    pub tap: f64,
    pub shift: f64,
    pub status: BranchStatus,
}

/// Aggregate generator injection at a bus (pu).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRecord {
    pub bus: i64,
    pub p_gen: f64,
    pub q_gen: f64,
    pub v_set: f64,
}

/// Validated canonical grid description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseData {
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub gens: Vec<GenRecord>,
    pub branches: Vec<BranchRecord>,
}

impl CaseData {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Position of a bus id in the canonical bus order.
    pub fn bus_index(&self, id: i64) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn bus_type_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for bus in &self.buses {
            match bus.bus_type {
                BusType::Slack => counts.0 += 1,
                BusType::Pv => counts.1 += 1,
                BusType::Pq => counts.2 += 1,
            }
        }
        counts
    }

    /// Checks every structural invariant, returning the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.buses.is_empty() {
            return Err(Error::EmptyBusList);
        }
        if !(self.base_mva > 0.0) {
            return Err(Error::NonPositiveBaseMva(self.base_mva));
        }
        let mut seen = HashSet::new();
        for bus in &self.buses {
            if !seen.insert(bus.id) {
                return Err(Error::DuplicateBusId(bus.id));
            }
        }
        let mut slack = None;
        for bus in &self.buses {
            if bus.bus_type == BusType::Slack {
                match slack {
                    None => slack = Some(bus.id),
                    Some(first) => return Err(Error::MultipleSlackBuses(first, bus.id)),
                }
            }
        }
        if slack.is_none() {
            return Err(Error::NoSlackBus);
        }
        for bus in &self.buses {
            if bus.bus_type != BusType::Pq && !(bus.v_set > 0.0) {
                return Err(Error::InvalidVoltageSetpoint(bus.id));
            }
        }
        for gen in &self.gens {
            if self.bus_index(gen.bus).is_none() {
                return Err(Error::UnknownBus {
                    bus: gen.bus,
                    referenced_by: "generator".into(),
                });
            }
            if !gen.p_gen.is_finite() {
                return Err(Error::NonFiniteGenPower(gen.bus));
            }
        }
        for br in &self.branches {
            for end in [br.from_bus, br.to_bus] {
                if self.bus_index(end).is_none() {
                    return Err(Error::UnknownBus {
                        bus: end,
                        referenced_by: "branch".into(),
                    });
                }
            }
            if br.status == BranchStatus::On && br.r == 0.0 && br.x == 0.0 {
                return Err(Error::ZeroImpedanceBranch {
                    from: br.from_bus,
                    to: br.to_bus,
                });
            }
            if !(br.tap > 0.0) {
                return Err(Error::InvalidTap {
                    from: br.from_bus,
                    to: br.to_bus,
                    tap: br.tap,
                });
            }
        }
        Ok(())
    }
}

/// Serializes a case to the canonical JSON document.
pub fn case_to_json(case: &CaseData) -> Result<String> {
    Ok(serde_json::to_string_pretty(case)?)
}

/// Parses and validates the canonical JSON document.
pub fn json_to_case(text: &str) -> Result<CaseData> {
    let case: CaseData = serde_json::from_str(text)?;
    case.validate()?;
    Ok(case)
}

// --- MATPOWER text format ---

struct NumberedRow {
    line: usize,
    values: Vec<f64>,
}

/// Raw matrix blocks pulled out of the `.m` text.
#[derive(Default)]
struct RawCase {
    base_mva: Option<(usize, f64)>,
    bus: Vec<NumberedRow>,
    gen: Vec<NumberedRow>,
    branch: Vec<NumberedRow>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

fn parse_row(line_no: usize, text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for token in text.split_whitespace() {
        let token = token.trim_end_matches(&[';', ','][..]);
        if token.is_empty() {
            continue;
        }
        let value: f64 = token
            .parse()
            .map_err(|_| parse_err(line_no, format!("expected a number, got `{token}`")))?;
        values.push(value);
    }
    Ok(values)
}

fn scan_blocks(text: &str) -> Result<RawCase> {
    let mut raw = RawCase::default();
    let mut block: Option<&'static str> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw_line).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = block {
            let closing = line.contains("];");
            let body = line.trim_end_matches("];").trim();
            if !body.is_empty() {
                let values = parse_row(line_no, body)?;
                if !values.is_empty() {
                    let row = NumberedRow {
                        line: line_no,
                        values,
                    };
                    match name {
                        "bus" => raw.bus.push(row),
                        "gen" => raw.gen.push(row),
                        "branch" => raw.branch.push(row),
                        _ => {} // skipped block (gencost etc.)
                    }
                }
            }
            if closing {
                block = None;
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("mpc.baseMVA") {
            let rest = rest.trim_start().strip_prefix('=').ok_or_else(|| {
                parse_err(line_no, "expected `=` after mpc.baseMVA")
            })?;
            let value: f64 = rest
                .trim()
                .trim_end_matches(';')
                .trim()
                .parse()
                .map_err(|_| parse_err(line_no, "invalid mpc.baseMVA value"))?;
            raw.base_mva = Some((line_no, value));
            continue;
        }
        if let Some(rest) = line.strip_prefix("mpc.") {
            if let Some(eq) = rest.find('=') {
                let name = rest[..eq].trim();
                let after = rest[eq + 1..].trim();
                if after.starts_with('[') {
                    let matched = match name {
                        "bus" => "bus",
                        "gen" => "gen",
                        "branch" => "branch",
                        _ => "skip",
                    };
                    let inline = after.trim_start_matches('[').trim();
                    if inline.contains("];") {
                        // single-line block
                        let body = inline.trim_end_matches("];").trim();
                        if !body.is_empty() {
                            let values = parse_row(line_no, body)?;
                            let row = NumberedRow {
                                line: line_no,
                                values,
                            };
                            match matched {
                                "bus" => raw.bus.push(row),
                                "gen" => raw.gen.push(row),
                                "branch" => raw.branch.push(row),
                                _ => {}
                            }
                        }
                    } else {
                        block = Some(matched);
                    }
                }
            }
            continue;
        }
        // `function mpc = ...`, version strings, and anything else: ignored.
    }
    Ok(raw)
}

fn col(row: &NumberedRow, idx: usize, what: &str) -> Result<f64> {
    row.values
        .get(idx)
        .copied()
        .ok_or_else(|| parse_err(row.line, format!("missing {what} column {}", idx + 1)))
}

/// Parses a MATPOWER-format case into validated per-unit [`CaseData`].
///
/// Bus types map 3→slack, 2→pv, 1→pq. Out-of-service branches and
/// generators are dropped; multiple generators on one bus are summed with
/// the voltage setpoint taken from the first.
pub fn parse_case(text: &str) -> Result<CaseData> {
    let raw = scan_blocks(text)?;
    let (base_line, base_mva) = raw
        .base_mva
        .ok_or_else(|| parse_err(0, "missing mpc.baseMVA"))?;
    if !(base_mva > 0.0) {
        return Err(parse_err(base_line, format!("non-positive baseMVA {base_mva}")));
    }
    if raw.bus.is_empty() {
        return Err(parse_err(0, "missing or empty mpc.bus block"));
    }

    let mut buses = Vec::with_capacity(raw.bus.len());
    for row in &raw.bus {
        let id = col(row, 0, "bus")? as i64;
        let bus_type = match col(row, 1, "bus")? as i64 {
            3 => BusType::Slack,
            2 => BusType::Pv,
            1 => BusType::Pq,
            other => {
                return Err(parse_err(row.line, format!("unsupported bus type {other}")));
            }
        };
        buses.push(BusRecord {
            id,
            bus_type,
            p_demand: col(row, 2, "bus")? / base_mva,
            q_demand: col(row, 3, "bus")? / base_mva,
            shunt_gs: col(row, 4, "bus")? / base_mva,
            shunt_bs: col(row, 5, "bus")? / base_mva,
            v_set: col(row, 7, "bus")?,
        });
    }

    // Aggregate in-service generators per bus, preserving first-seen order.
    let mut gen_order = Vec::new();
    let mut gen_map: HashMap<i64, GenRecord> = HashMap::new();
    for row in &raw.gen {
        let bus = col(row, 0, "gen")? as i64;
        let status = row.values.get(7).copied().unwrap_or(1.0);
        if status <= 0.0 {
            continue;
        }
        let p_gen = col(row, 1, "gen")? / base_mva;
        let q_gen = col(row, 2, "gen")? / base_mva;
        let v_set = col(row, 5, "gen")?;
        match gen_map.get_mut(&bus) {
            Some(existing) => {
                existing.p_gen += p_gen;
                existing.q_gen += q_gen;
            }
            None => {
                gen_order.push(bus);
                gen_map.insert(
                    bus,
                    GenRecord {
                        bus,
                        p_gen,
                        q_gen,
                        v_set,
                    },
                );
            }
        }
    }
    let gens: Vec<GenRecord> = gen_order
        .into_iter()
        .map(|bus| gen_map.remove(&bus).expect("ordered key"))
        .collect();

    // Regulated buses take their magnitude setpoint from the generator.
    for gen in &gens {
        if let Some(idx) = buses.iter().position(|b| b.id == gen.bus) {
            if buses[idx].bus_type != BusType::Pq && gen.v_set > 0.0 {
                buses[idx].v_set = gen.v_set;
            }
        }
    }

    let mut branches = Vec::with_capacity(raw.branch.len());
    for row in &raw.branch {
        let status = row.values.get(10).copied().unwrap_or(1.0);
        if status <= 0.0 {
            continue;
        }
        let tap_raw = row.values.get(8).copied().unwrap_or(0.0);
        branches.push(BranchRecord {
            from_bus: col(row, 0, "branch")? as i64,
            to_bus: col(row, 1, "branch")? as i64,
            r: col(row, 2, "branch")?,
            x: col(row, 3, "branch")?,
            b_charge: col(row, 4, "branch")?,
            tap: if tap_raw == 0.0 { 1.0 } else { tap_raw },
            shift: row.values.get(9).copied().unwrap_or(0.0).to_radians(),
            status: BranchStatus::On,
        });
    }

    let case = CaseData {
        base_mva,
        buses,
        gens,
        branches,
    };
    case.validate()?;
    Ok(case)
}

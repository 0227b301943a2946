//! Energy, carbon and cost of classification runs, with everyday
//! equivalents.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::UsageTotals;

pub const COEFFICIENT_TABLE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FootprintError {
    #[error("no energy coefficients for: {}", .0.join(", "))]
    UnknownModels(Vec<String>),
    #[error("coefficient for {model}: {field} must be positive")]
    InvalidCoefficient { model: String, field: &'static str },
    #[error("equivalence factor {0} must be positive")]
    InvalidFactor(&'static str),
    #[error("unsupported coefficient table version {0}")]
    Version(u32),
    #[error("coefficient table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCoefficients {
    pub energy_per_prompt_wh: f64,
    pub cip_kgco2e_per_kwh: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_per_call: Option<f64>,
}

/// Energy and carbon of one prompt: `(Wh, gCO2e)`. Wh × kgCO2e/kWh is
/// numerically gCO2e.
pub fn prompt_footprint(c: &ModelCoefficients) -> (f64, f64) {
    (c.energy_per_prompt_wh, c.energy_per_prompt_wh * c.cip_kgco2e_per_kwh)
}

/// Per-model coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub version: u32,
    pub models: BTreeMap<String, ModelCoefficients>,
    /// Model ids priced with worst-case coefficients.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub worst_case: Vec<String>,
}

impl Default for EnergyModel {
    fn default() -> Self {
        let entry = |wh, cip| ModelCoefficients {
            energy_per_prompt_wh: wh,
            cip_kgco2e_per_kwh: cip,
            price_per_call: None,
        };
        EnergyModel {
            version: COEFFICIENT_TABLE_VERSION,
            models: BTreeMap::from([
                ("DeepSeek-V3".to_string(), entry(13.162, 0.600)),
                ("Llama-3.1-70B".to_string(), entry(19.183, 0.287)),
            ]),
            worst_case: Vec::new(),
        }
    }
}

fn short_name(id: &str) -> String {
    id.rsplit('/').next().unwrap_or(id).to_ascii_lowercase()
}

impl EnergyModel {
    pub fn from_json(text: &str) -> Result<Self, FootprintError> {
        let m: EnergyModel = serde_json::from_str(text).map_err(|e| FootprintError::Table(e.to_string()))?;
        if m.version != COEFFICIENT_TABLE_VERSION {
            return Err(FootprintError::Version(m.version));
        }
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, FootprintError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FootprintError::Table(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn validate(&self) -> Result<(), FootprintError> {
        for (model, c) in &self.models {
            let check = |v: f64, field| {
                if v.is_finite() && v > 0.0 {
                    Ok(())
                } else {
                    Err(FootprintError::InvalidCoefficient {
                        model: model.clone(),
                        field,
                    })
                }
            };
            check(c.energy_per_prompt_wh, "energy_per_prompt_wh")?;
            check(c.cip_kgco2e_per_kwh, "cip_kgco2e_per_kwh")?;
            if let Some(p) = c.price_per_call {
                check(p, "price_per_call")?;
            }
        }
        Ok(())
    }

    /// Exact id first, then a case-insensitive match on the last path
    /// segment, allowing suffixes such as `-Instruct`.
    pub fn lookup(&self, model_id: &str) -> Option<(&str, &ModelCoefficients)> {
        if let Some((k, v)) = self.models.get_key_value(model_id) {
            return Some((k, v));
        }
        let short = short_name(model_id);
        self.models
            .iter()
            .find(|(k, _)| {
                let key = short_name(k);
                short == key || short.starts_with(&format!("{key}-"))
            })
            .map(|(k, v)| (k.as_str(), v))
    }

    /// Adds entries for `ids` using the highest energy and the highest
    /// carbon intensity present in the table.
    pub fn with_worst_case(mut self, ids: &[String]) -> Self {
        let wh = self.models.values().map(|c| c.energy_per_prompt_wh).fold(0.0, f64::max);
        let cip = self.models.values().map(|c| c.cip_kgco2e_per_kwh).fold(0.0, f64::max);
        for id in ids {
            if self.lookup(id).is_none() {
                self.models.insert(
                    id.clone(),
                    ModelCoefficients {
                        energy_per_prompt_wh: wh,
                        cip_kgco2e_per_kwh: cip,
                        price_per_call: None,
                    },
                );
                self.worst_case.push(id.clone());
            }
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquivalenceFactors {
    pub car_kg_per_mile: f64,
    pub km_per_mile: f64,
    pub flight_kg_per_km: f64,
    pub tree_kg_per_year: f64,
    pub us_resident_kg_per_year: f64,
    pub target_kg_per_year: f64,
    pub resident_kwh_per_year: f64,
    pub desktop_kwh_per_year: f64,
    pub notebook_kwh_per_year: f64,
}

impl Default for EquivalenceFactors {
    fn default() -> Self {
        EquivalenceFactors {
            car_kg_per_mile: 0.4,
            km_per_mile: 1.609,
            flight_kg_per_km: 0.25,
            tree_kg_per_year: 10.0,
            us_resident_kg_per_year: 14_500.0,
            target_kg_per_year: 2_000.0,
            resident_kwh_per_year: 2_223.0,
            desktop_kwh_per_year: 100.0,
            notebook_kwh_per_year: 50.0,
        }
    }
}

impl EquivalenceFactors {
    pub fn validate(&self) -> Result<(), FootprintError> {
        let all = [
            (self.car_kg_per_mile, "car_kg_per_mile"),
            (self.km_per_mile, "km_per_mile"),
            (self.flight_kg_per_km, "flight_kg_per_km"),
            (self.tree_kg_per_year, "tree_kg_per_year"),
            (self.us_resident_kg_per_year, "us_resident_kg_per_year"),
            (self.target_kg_per_year, "target_kg_per_year"),
            (self.resident_kwh_per_year, "resident_kwh_per_year"),
            (self.desktop_kwh_per_year, "desktop_kwh_per_year"),
            (self.notebook_kwh_per_year, "notebook_kwh_per_year"),
        ];
        match all.iter().find(|(v, _)| !(v.is_finite() && *v > 0.0)) {
            Some((_, name)) => Err(FootprintError::InvalidFactor(name)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Equivalents {
    pub car_km: f64,
    pub flight_km: f64,
    pub tree_years: f64,
    /// Share of a US resident's yearly footprint.
    pub personal_footprint_share: f64,
    /// Share of the per-capita yearly budget compatible with 1.5 °C.
    pub target_footprint_share: f64,
    /// Share of a French resident's yearly electricity use.
    pub resident_electricity_share: f64,
    pub desktop_pc_years: f64,
    pub notebook_years: f64,
}

pub fn equivalents(
    co2e_kg: f64,
    energy_kwh: f64,
    f: &EquivalenceFactors,
) -> Result<Equivalents, FootprintError> {
    f.validate()?;
    Ok(Equivalents {
        car_km: co2e_kg / f.car_kg_per_mile * f.km_per_mile,
        flight_km: co2e_kg / f.flight_kg_per_km,
        tree_years: co2e_kg / f.tree_kg_per_year,
        personal_footprint_share: co2e_kg / f.us_resident_kg_per_year,
        target_footprint_share: co2e_kg / f.target_kg_per_year,
        resident_electricity_share: energy_kwh / f.resident_kwh_per_year,
        desktop_pc_years: energy_kwh / f.desktop_kwh_per_year,
        notebook_years: energy_kwh / f.notebook_kwh_per_year,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFootprint {
    pub model_id: String,
    /// Table entry used for this model.
    pub coefficients_key: String,
    pub calls: u64,
    pub energy_per_prompt_wh: f64,
    pub cip_kgco2e_per_kwh: f64,
    pub energy_kwh: f64,
    pub co2e_kg: f64,
    pub cost: Option<f64>,
    pub worst_case: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintReport {
    pub calls: u64,
    pub total_energy_kwh: f64,
    pub total_co2e_kg: f64,
    /// Present only when every model has a price.
    pub total_cost: Option<f64>,
    pub per_model: Vec<ModelFootprint>,
    /// Same totals with per-prompt energy rounded to 0.001 kWh.
    pub rounded_energy_kwh: f64,
    pub rounded_co2e_kg: f64,
    pub equivalents: Equivalents,
}

fn round_kwh(wh: f64) -> f64 {
    wh.round() / 1000.0
}

pub fn aggregate_footprint(
    totals: &BTreeMap<String, UsageTotals>,
    model: &EnergyModel,
) -> Result<FootprintReport, FootprintError> {
    aggregate_footprint_with(totals, model, &EquivalenceFactors::default())
}

pub fn aggregate_footprint_with(
    totals: &BTreeMap<String, UsageTotals>,
    model: &EnergyModel,
    factors: &EquivalenceFactors,
) -> Result<FootprintReport, FootprintError> {
    let missing: Vec<String> = totals
        .keys()
        .filter(|id| model.lookup(id).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(FootprintError::UnknownModels(missing));
    }
    let mut per_model = Vec::new();
    let (mut calls, mut energy, mut co2e, mut r_energy, mut r_co2e) = (0u64, 0.0, 0.0, 0.0, 0.0);
    let mut cost = Some(0.0);
    for (id, t) in totals {
        let (key, c) = model.lookup(id).expect("checked above");
        let n = t.calls as f64;
        let e_kwh = n * c.energy_per_prompt_wh / 1000.0;
        let kg = e_kwh * c.cip_kgco2e_per_kwh;
        let price = c.price_per_call.map(|p| p * n);
        calls += t.calls;
        energy += e_kwh;
        co2e += kg;
        let rounded = n * round_kwh(c.energy_per_prompt_wh);
        r_energy += rounded;
        r_co2e += rounded * c.cip_kgco2e_per_kwh;
        cost = cost.zip(price).map(|(a, b)| a + b);
        per_model.push(ModelFootprint {
            model_id: id.clone(),
            coefficients_key: key.to_string(),
            calls: t.calls,
            energy_per_prompt_wh: c.energy_per_prompt_wh,
            cip_kgco2e_per_kwh: c.cip_kgco2e_per_kwh,
            energy_kwh: e_kwh,
            co2e_kg: kg,
            cost: price,
            worst_case: model.worst_case.iter().any(|w| w == key),
        });
    }
    if per_model.is_empty() {
        cost = None;
    }
    Ok(FootprintReport {
        calls,
        total_energy_kwh: energy,
        total_co2e_kg: co2e,
        total_cost: cost,
        per_model,
        rounded_energy_kwh: r_energy,
        rounded_co2e_kg: r_co2e,
        equivalents: equivalents(co2e, energy, factors)?,
    })
}

impl FootprintReport {
    /// Plain-text table in the style of a resource summary.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let row = |s: &mut String, k: &str, v: String| {
            let _ = writeln!(s, "{k:<40}{v}");
        };
        row(&mut s, "Prompt Number", self.calls.to_string());
        for m in &self.per_model {
            let (wh, g) = prompt_footprint(&ModelCoefficients {
                energy_per_prompt_wh: m.energy_per_prompt_wh,
                cip_kgco2e_per_kwh: m.cip_kgco2e_per_kwh,
                price_per_call: None,
            });
            let tag = if m.worst_case { " [worst case]" } else { "" };
            row(
                &mut s,
                &format!("  {}{tag}", m.model_id),
                format!(
                    "{} calls, {wh:.3} Wh/prompt, {g:.3} g CO2e/prompt, {:.3} kWh, {:.3} kgCO2e",
                    m.calls, m.energy_kwh, m.co2e_kg
                ),
            );
        }
        row(&mut s, "Total Energy Consumption", format!("{:.3} kWh", self.total_energy_kwh));
        row(&mut s, "Total Carbon Footprint", format!("{:.3} kgCO2e", self.total_co2e_kg));
        row(
            &mut s,
            "  with per-prompt energy in 0.001 kWh",
            format!("{:.3} kWh, {:.3} kgCO2e", self.rounded_energy_kwh, self.rounded_co2e_kg),
        );
        row(
            &mut s,
            "Total Cost",
            self.total_cost.map_or("n/a".to_string(), |c| format!("{c:.2}")),
        );
        let e = &self.equivalents;
        row(&mut s, "Car driving", format!("{:.0} km", e.car_km));
        row(&mut s, "Flight", format!("{:.0} km", e.flight_km));
        row(&mut s, "Tree absorption", format!("{:.1} tree-years", e.tree_years));
        row(
            &mut s,
            "Personal footprint (US resident)",
            format!("{:.1}%", e.personal_footprint_share * 100.0),
        );
        row(
            &mut s,
            "Personal footprint (1.5 C target)",
            format!("{:.1}%", e.target_footprint_share * 100.0),
        );
        row(
            &mut s,
            "Resident yearly electricity",
            format!("{:.1}%", e.resident_electricity_share * 100.0),
        );
        row(&mut s, "Desktop PC years", format!("{:.1}", e.desktop_pc_years));
        row(&mut s, "Notebook years", format!("{:.1}", e.notebook_years));
        s
    }
}

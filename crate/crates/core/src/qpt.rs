//! Ingestion of measured process (χ) matrices and device calibration
//! data, and conversion of records into noisy gatesets.
//!
//! Record files are JSON with complex entries as `[re, im]` pairs and an
//! explicit `basis_tag` declaring the Pauli ordering, so χ data cannot be
//! silently misread. Round-trips are bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channels::{choi_to_kraus, chi_to_choi, kraus_to_chi, ChiMatrix, KrausChannel};
use crate::circuit::{GateDurations, Gateset, NoisePolicy, StandardNoiseParams};
use crate::error::{CoreError, Result};
use crate::tensor::{C64, ComplexTensor};

/// Hermiticity tolerance accepted for measured χ matrices.
pub const QPT_HERMITICITY_TOL: f64 = 1e-6;
/// CPTP tolerance required of channels built from measured data.
pub const QPT_CPTP_TOL: f64 = 1e-6;
/// The only basis ordering this crate reads or writes: unnormalized Pauli
/// strings {I,X,Y,Z}^⊗n, lexicographic, qubit 0 most significant.
pub const PAULI_BASIS_TAG: &str = "pauli-IXYZ-lex";

/// One validated process-tomography record.
#[derive(Debug, Clone)]
pub struct QptRecord {
    pub gate_label: String,
    pub qubits: Vec<usize>,
    pub chi: ChiMatrix,
    pub basis_tag: String,
    /// ISO-8601 acquisition time, kept for staleness tracking.
    pub timestamp: String,
}

impl QptRecord {
    pub fn name(&self) -> String {
        format!("{}{:?}", self.gate_label, self.qubits)
    }
}

/// Build a synthetic record from a known channel by exporting its exact χ
/// matrix. Used to fabricate device fixtures in tests and demos.
pub fn synthetic_record(
    gate_label: &str,
    qubits: &[usize],
    channel: &KrausChannel,
    timestamp: &str,
) -> Result<QptRecord> {
    Ok(QptRecord {
        gate_label: gate_label.to_string(),
        qubits: qubits.to_vec(),
        chi: kraus_to_chi(channel)?,
        basis_tag: PAULI_BASIS_TAG.to_string(),
        timestamp: timestamp.to_string(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct QptFile {
    schema_version: u32,
    records: Vec<QptRecordEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct QptRecordEntry {
    gate_label: String,
    qubits: Vec<usize>,
    basis_tag: String,
    timestamp: String,
    /// Row-major d²×d² matrix of [re, im] pairs.
    chi: Vec<Vec<[f64; 2]>>,
}

fn chi_to_rows(chi: &ChiMatrix) -> Vec<Vec<[f64; 2]>> {
    let d2 = chi.entries().shape()[0];
    (0..d2)
        .map(|r| {
            (0..d2)
                .map(|c| {
                    let z = chi.entries().get(&[r, c]);
                    [z.re, z.im]
                })
                .collect()
        })
        .collect()
}

/// Load and validate a record file. Hermiticity defects beyond the QPT
/// tolerance are rejected with per-record diagnostics.
pub fn load_qpt_file(path: &Path) -> Result<Vec<QptRecord>> {
    let text = std::fs::read_to_string(path)?;
    let file: QptFile = serde_json::from_str(&text)
        .map_err(|e| CoreError::Parse(format!("{}: {e}", path.display())))?;
    if file.schema_version != 1 {
        return Err(CoreError::Schema(format!(
            "unsupported QPT schema version {}",
            file.schema_version
        )));
    }
    let mut records = Vec::with_capacity(file.records.len());
    for (idx, entry) in file.records.iter().enumerate() {
        let name = format!("record {idx} ({}{:?})", entry.gate_label, entry.qubits);
        if entry.basis_tag != PAULI_BASIS_TAG {
            return Err(CoreError::Schema(format!(
                "{name}: unsupported basis tag {:?} (expected {PAULI_BASIS_TAG:?})",
                entry.basis_tag
            )));
        }
        let n = entry.qubits.len();
        let d2 = 1usize << (2 * n);
        if entry.chi.len() != d2 || entry.chi.iter().any(|row| row.len() != d2) {
            return Err(CoreError::Validation(format!(
                "{name}: chi matrix is not {d2}x{d2}"
            )));
        }
        let mut data = Vec::with_capacity(d2 * d2);
        for row in &entry.chi {
            for &[re, im] in row {
                data.push(C64::new(re, im));
            }
        }
        let tensor = ComplexTensor::new(vec![d2, d2], data)?;
        let chi = ChiMatrix::with_tolerance(n, tensor, QPT_HERMITICITY_TOL).map_err(|e| {
            CoreError::Validation(format!("{name}: {e}"))
        })?;
        records.push(QptRecord {
            gate_label: entry.gate_label.clone(),
            qubits: entry.qubits.clone(),
            chi,
            basis_tag: entry.basis_tag.clone(),
            timestamp: entry.timestamp.clone(),
        });
    }
    Ok(records)
}

/// Write records to a file; `load_qpt_file` recovers them bit-exactly.
pub fn save_qpt_file(records: &[QptRecord], path: &Path) -> Result<()> {
    let file = QptFile {
        schema_version: 1,
        records: records
            .iter()
            .map(|r| QptRecordEntry {
                gate_label: r.gate_label.clone(),
                qubits: r.qubits.clone(),
                basis_tag: r.basis_tag.clone(),
                timestamp: r.timestamp.clone(),
                chi: chi_to_rows(&r.chi),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| CoreError::Parse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Convert validated records into a gateset of Kraus channels via
/// χ → Choi → Kraus, optionally pruning to `rank_cutoff` operators.
pub fn build_noisy_gateset(
    records: &[QptRecord],
    rank_cutoff: Option<usize>,
    eig_floor: f64,
) -> Result<Gateset> {
    let mut gs = Gateset::new();
    for record in records {
        let choi = chi_to_choi(&record.chi)
            .map_err(|e| CoreError::Validation(format!("{}: {e}", record.name())))?;
        let conv = choi_to_kraus(&choi, rank_cutoff, eig_floor).map_err(|e| match e {
            CoreError::NonCompletelyPositive { eigenvalue, floor } => CoreError::Validation(
                format!(
                    "{}: record is not completely positive (eigenvalue {eigenvalue:.3e} below -{floor:.1e})",
                    record.name()
                ),
            ),
            other => other,
        })?;
        let report = conv.channel.validate_cptp(QPT_CPTP_TOL);
        if !report.pass {
            return Err(CoreError::Validation(format!(
                "{}: converted channel fails CPTP at {:.1e} (defect {:.3e})",
                record.name(),
                QPT_CPTP_TOL,
                report.defect
            )));
        }
        gs.insert((record.gate_label.clone(), record.qubits.clone()), conv.channel);
    }
    Ok(gs)
}

/// Per-qubit calibration entry, mirroring typical device fact sheets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QubitCalibration {
    pub label: String,
    pub t1_us: f64,
    pub t2_us: f64,
    pub frequency_ghz: f64,
    pub readout_fidelity: f64,
}

/// Two-qubit gate fidelity between physically connected neighbors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairCalibration {
    pub qubits: [usize; 2],
    pub fidelity: f64,
}

/// Device calibration file (schema version 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceCalibration {
    pub schema_version: u32,
    pub qubits: Vec<QubitCalibration>,
    #[serde(default)]
    pub cz_pairs: Vec<PairCalibration>,
}

impl DeviceCalibration {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != 1 {
            return Err(CoreError::Schema(format!(
                "unsupported calibration schema version {}",
                self.schema_version
            )));
        }
        for q in &self.qubits {
            if !(q.t1_us > 0.0) || !(q.t2_us > 0.0) {
                return Err(CoreError::Validation(format!(
                    "qubit {}: t1/t2 must be positive",
                    q.label
                )));
            }
            if !(0.0..=1.0).contains(&q.readout_fidelity) {
                return Err(CoreError::Validation(format!(
                    "qubit {}: readout fidelity {} outside [0,1]",
                    q.label, q.readout_fidelity
                )));
            }
        }
        for p in &self.cz_pairs {
            if !(0.0..=1.0).contains(&p.fidelity) {
                return Err(CoreError::Validation(format!(
                    "pair {:?}: fidelity {} outside [0,1]",
                    p.qubits, p.fidelity
                )));
            }
            if p.qubits[0] >= self.qubits.len() || p.qubits[1] >= self.qubits.len() {
                return Err(CoreError::Validation(format!(
                    "pair {:?}: index out of range",
                    p.qubits
                )));
            }
        }
        Ok(())
    }
}

pub fn load_calibration(path: &Path) -> Result<DeviceCalibration> {
    let text = std::fs::read_to_string(path)?;
    let cal: DeviceCalibration = serde_json::from_str(&text)
        .map_err(|e| CoreError::Parse(format!("{}: {e}", path.display())))?;
    cal.validate()?;
    Ok(cal)
}

pub fn save_calibration(cal: &DeviceCalibration, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(cal).map_err(|e| CoreError::Parse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Derive a standard (General-model) noise policy from calibration data:
/// thermal relaxation from per-qubit T1/T2 at the given durations, SPAM
/// from readout infidelity, and per-pair depolarizing strength from the
/// heuristic `p = 4/3 · (1 − F_pair)`. An empty calibration degrades to
/// the ideal policy with a warning. Measured-gateset simulation never uses
/// this mapping.
pub fn standard_policy_from_calibration(
    cal: &DeviceCalibration,
    durations: GateDurations,
) -> Result<(NoisePolicy, Vec<String>)> {
    cal.validate()?;
    let mut warnings = Vec::new();
    if cal.qubits.is_empty() {
        warnings.push("calibration lists no qubits; falling back to the ideal policy".into());
        return Ok((NoisePolicy::ideal(), warnings));
    }
    let mut params = StandardNoiseParams { durations, ..StandardNoiseParams::default() };
    let mut relaxation = BTreeMap::new();
    let mut spam = BTreeMap::new();
    for (idx, q) in cal.qubits.iter().enumerate() {
        let t1 = q.t1_us * 1e-6;
        let mut t2 = q.t2_us * 1e-6;
        if t2 > 2.0 * t1 {
            warnings.push(format!(
                "qubit {}: t2 {}us exceeds 2*t1; clamping",
                q.label, q.t2_us
            ));
            t2 = 2.0 * t1;
        }
        relaxation.insert(idx, (t1, t2));
        spam.insert(idx, (1.0 - q.readout_fidelity).clamp(0.0, 1.0));
    }
    params.relaxation = relaxation;
    params.spam_overrides = spam;
    for p in &cal.cz_pairs {
        let key = (p.qubits[0].min(p.qubits[1]), p.qubits[0].max(p.qubits[1]));
        let dep = (4.0 / 3.0 * (1.0 - p.fidelity)).clamp(0.0, 1.0);
        params.pair_depolarizing.insert(key, dep);
    }
    Ok((NoisePolicy::general(params), warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::test_support::random_density;
    use crate::channels::{depolarizing, DEFAULT_EIG_FLOOR};
    use crate::circuit::{Gate, NoiseMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn identity_record() -> QptRecord {
        synthetic_record("I", &[0], &KrausChannel::identity(1), "2026-01-01T00:00:00Z").unwrap()
    }

    fn noisy_cz_channel(p: f64) -> KrausChannel {
        let cz = KrausChannel::from_operators(2, vec![Gate::cz(0, 1).unitary().unwrap()]).unwrap();
        let dep = depolarizing(p).unwrap().tensor_product(&KrausChannel::identity(1)).unwrap();
        cz.then(&dep).unwrap()
    }

    #[test]
    fn identity_record_loads_and_converts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.json");
        save_qpt_file(&[identity_record()], &path).unwrap();
        let records = load_qpt_file(&path).unwrap();
        assert_eq!(records.len(), 1);
        let gs = build_noisy_gateset(&records, None, DEFAULT_EIG_FLOOR).unwrap();
        let ch = gs.get(&("I".to_string(), vec![0])).unwrap();
        assert_eq!(ch.rank(), 1);
        assert!(ch.operators()[0].dist(&ComplexTensor::identity(2)) < 1e-10);
    }

    #[test]
    fn non_hermitian_chi_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let mut rec = identity_record();
        // Corrupt one off-diagonal entry.
        let mut entries = rec.chi.entries().clone();
        entries.set(&[0, 1], C64::new(0.5, 0.0));
        // Bypass the constructor check to fabricate a corrupt file.
        rec.chi = ChiMatrix::with_tolerance(1, entries, 10.0).unwrap();
        save_qpt_file(&[rec], &path).unwrap();
        let err = load_qpt_file(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("record 0"), "{msg}");
        assert!(msg.contains('I'), "{msg}");
    }

    #[test]
    fn synthetic_cz_record_roundtrips_bit_exactly() {
        let rec = synthetic_record("CZ", &[3, 4], &noisy_cz_channel(0.05), "2026-02-03T04:05:06Z")
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cz.json");
        save_qpt_file(&[rec.clone()], &path).unwrap();
        let back = load_qpt_file(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].gate_label, "CZ");
        assert_eq!(back[0].qubits, vec![3, 4]);
        assert_eq!(back[0].timestamp, rec.timestamp);
        // Bit-exact matrix round-trip.
        assert_eq!(back[0].chi.entries().data(), rec.chi.entries().data());
    }

    #[test]
    fn gateset_reproduces_generating_channel_action() {
        let gen = noisy_cz_channel(0.05);
        let rec = synthetic_record("CZ", &[0, 1], &gen, "2026-01-01T00:00:00Z").unwrap();
        let gs = build_noisy_gateset(&[rec], None, DEFAULT_EIG_FLOOR).unwrap();
        let ch = gs.get(&("CZ".to_string(), vec![0, 1])).unwrap();
        assert_eq!(ch.rank(), 4);
        assert!(ch.validate_cptp(QPT_CPTP_TOL).pass);
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        for _ in 0..10 {
            let rho = random_density(&mut rng, 4);
            let a = gen.apply_dense(&rho).unwrap();
            let b = ch.apply_dense(&rho).unwrap();
            assert!(a.dist(&b) < 1e-8);
        }
    }

    #[test]
    fn rank_cutoff_gateset_restores_completeness() {
        let gen = noisy_cz_channel(0.05);
        let rec = synthetic_record("CZ", &[0, 1], &gen, "2026-01-01T00:00:00Z").unwrap();
        let gs = build_noisy_gateset(&[rec], Some(2), DEFAULT_EIG_FLOOR).unwrap();
        let ch = gs.get(&("CZ".to_string(), vec![0, 1])).unwrap();
        assert_eq!(ch.rank(), 2);
        assert!(ch.validate_cptp(QPT_CPTP_TOL).pass);
    }

    #[test]
    fn calibration_parse_and_policy() {
        let cal = DeviceCalibration {
            schema_version: 1,
            qubits: vec![
                QubitCalibration {
                    label: "Q108".into(),
                    t1_us: 17.01,
                    t2_us: 22.58,
                    frequency_ghz: 4.294,
                    readout_fidelity: 0.958,
                },
                QubitCalibration {
                    label: "Q109".into(),
                    t1_us: 42.25,
                    t2_us: 26.36,
                    frequency_ghz: 4.550,
                    readout_fidelity: 0.977,
                },
            ],
            cz_pairs: vec![PairCalibration { qubits: [0, 1], fidelity: 0.957 }],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cal.json");
        save_calibration(&cal, &path).unwrap();
        let loaded = load_calibration(&path).unwrap();
        assert_eq!(loaded.qubits[0].label, "Q108");
        assert!((loaded.qubits[0].t1_us - 17.01).abs() < 1e-12);
        assert!((loaded.qubits[0].frequency_ghz - 4.294).abs() < 1e-12);

        let (policy, warnings) =
            standard_policy_from_calibration(&loaded, GateDurations::default()).unwrap();
        assert!(warnings.is_empty());
        let NoiseMode::General(params) = &policy.mode else {
            panic!("expected the general model")
        };
        assert!((params.spam_overrides[&0] - 0.042).abs() < 1e-12);
        assert!((params.relaxation[&0].0 - 17.01e-6).abs() < 1e-18);
        let want_p = 4.0 / 3.0 * (1.0 - 0.957);
        assert!((params.pair_depolarizing[&(0, 1)] - want_p).abs() < 1e-12);
    }

    #[test]
    fn empty_calibration_degrades_to_ideal() {
        let cal = DeviceCalibration { schema_version: 1, qubits: vec![], cz_pairs: vec![] };
        let (policy, warnings) =
            standard_policy_from_calibration(&cal, GateDurations::default()).unwrap();
        assert!(policy.is_ideal());
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn calibration_rejects_bad_fields() {
        let cal = DeviceCalibration {
            schema_version: 1,
            qubits: vec![QubitCalibration {
                label: "Q0".into(),
                t1_us: -1.0,
                t2_us: 10.0,
                frequency_ghz: 4.0,
                readout_fidelity: 0.9,
            }],
            cz_pairs: vec![],
        };
        assert!(cal.validate().is_err());
    }

    #[test]
    fn wrong_basis_tag_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tag.json");
        let mut rec = identity_record();
        rec.basis_tag = "pauli-ZXYI".into();
        save_qpt_file(&[rec], &path).unwrap();
        assert!(matches!(load_qpt_file(&path), Err(CoreError::Schema(_))));
    }

    #[test]
    fn gateset_channels_pass_cptp_property() {
        let mut rng = ChaCha12Rng::seed_from_u64(91);
        let mut records = Vec::new();
        for pair in [[0usize, 1], [1, 2], [2, 3]] {
            let ch = crate::channels::test_support::random_channel(&mut rng, 2, 5);
            records.push(synthetic_record("CZ", &pair, &ch, "2026-01-01T00:00:00Z").unwrap());
        }
        let gs = build_noisy_gateset(&records, None, DEFAULT_EIG_FLOOR).unwrap();
        for ch in gs.values() {
            assert!(ch.validate_cptp(QPT_CPTP_TOL).pass);
        }
    }
}

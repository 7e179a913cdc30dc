//! JSONL dataset format.
//!
//! One JSON object per line:
//!
//! ```text
//! {"id": str,
//!  "atoms": [{"z": int, "tag": int}, ...],
//!  "bonds": [{"i": int, "j": int, "type": "single|double|triple|aromatic"}, ...],
//!  "conformers": [{"coords": [[x, y, z], ...], "weight": float}, ...],
//!  "label": number}            // optional
//! ```
//!
//! An optional first line `{"header": {...}}` carries dataset-level
//! metadata (e.g. the diameter class edges a synthetic set was bucketed
//! with). In strict mode any other unknown key is rejected; `Lenient`
//! ignores unknown keys everywhere.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

use super::{Atom, Bond, BondType, Conformer, Molecule2D, MoleculeRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseMode {
    /// Unknown keys are an error.
    Strict,
    /// Unknown keys are ignored.
    Lenient,
}

/// Dataset-level metadata stored on the optional header line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    /// Ascending cut points; a diameter d falls in class
    /// `#edges strictly below d`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diameter_edges: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<Value>,
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub header: Option<DatasetHeader>,
    pub records: Vec<MoleculeRecord>,
}

/// Parse a dataset, header line included if present.
pub fn load_dataset(path: &Path, mode: ParseMode) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let mut header = None;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "expected a JSON object".into(),
        })?;
        if obj.contains_key("header") {
            if line_no != 1 || !records.is_empty() || header.is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "header line only allowed as the first line".into(),
                });
            }
            header = Some(parse_header(obj, mode, line_no)?);
            continue;
        }
        records.push(parse_record(obj, mode, line_no)?);
    }
    Ok(Dataset { header, records })
}

/// Records only; a valid header line, when present, is skipped.
pub fn parse_jsonl(path: &Path, mode: ParseMode) -> Result<Vec<MoleculeRecord>> {
    Ok(load_dataset(path, mode)?.records)
}

fn parse_header(obj: &Map<String, Value>, mode: ParseMode, line: usize) -> Result<DatasetHeader> {
    if mode == ParseMode::Strict {
        reject_unknown(obj, &["header"], line, "header line")?;
    }
    let inner = &obj["header"];
    let inner_obj = inner.as_object().ok_or_else(|| Error::Parse {
        line,
        msg: "header must be an object".into(),
    })?;
    if mode == ParseMode::Strict {
        reject_unknown(
            inner_obj,
            &["task", "diameter_edges", "generator"],
            line,
            "header",
        )?;
    }
    serde_json::from_value(inner.clone()).map_err(|e| Error::Parse {
        line,
        msg: format!("invalid header: {e}"),
    })
}

fn reject_unknown(
    obj: &Map<String, Value>,
    allowed: &[&str],
    line: usize,
    what: &str,
) -> Result<()> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::Parse {
                line,
                msg: format!("unknown key `{key}` in {what}"),
            });
        }
    }
    Ok(())
}

fn get_u64(obj: &Map<String, Value>, key: &str, line: usize, what: &str) -> Result<u64> {
    obj.get(key)
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("{what}: missing or non-integer `{key}`"),
        })
}

fn get_f64(value: &Value, line: usize, what: &str) -> Result<f64> {
    value.as_f64().ok_or_else(|| Error::Parse {
        line,
        msg: format!("{what}: expected a number"),
    })
}

fn parse_record(obj: &Map<String, Value>, mode: ParseMode, line: usize) -> Result<MoleculeRecord> {
    if mode == ParseMode::Strict {
        reject_unknown(
            obj,
            &["id", "atoms", "bonds", "conformers", "label"],
            line,
            "record",
        )?;
    }
    let id = obj
        .get("id")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Parse {
            line,
            msg: "missing or non-string `id`".into(),
        })?
        .to_string();

    let atoms_val = obj
        .get("atoms")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("record `{id}`: missing `atoms` array"),
        })?;
    let mut atoms = Vec::with_capacity(atoms_val.len());
    for (a_idx, av) in atoms_val.iter().enumerate() {
        let aobj = av.as_object().ok_or_else(|| Error::Parse {
            line,
            msg: format!("record `{id}`: atom {a_idx} is not an object"),
        })?;
        if mode == ParseMode::Strict {
            reject_unknown(aobj, &["z", "tag"], line, &format!("atom {a_idx}"))?;
        }
        let z = get_u64(aobj, "z", line, &format!("record `{id}` atom {a_idx}"))?;
        if z > super::MAX_ATOMIC_NUMBER as u64 {
            return Err(Error::Parse {
                line,
                msg: format!("record `{id}`: atom {a_idx} has invalid atomic number {z}"),
            });
        }
        let tag = get_u64(aobj, "tag", line, &format!("record `{id}` atom {a_idx}"))?;
        atoms.push(Atom::new(z as u8, tag as u32));
    }

    let bonds_val = obj
        .get("bonds")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("record `{id}`: missing `bonds` array"),
        })?;
    let mut bonds = Vec::with_capacity(bonds_val.len());
    for (b_idx, bv) in bonds_val.iter().enumerate() {
        let bobj = bv.as_object().ok_or_else(|| Error::Parse {
            line,
            msg: format!("record `{id}`: bond {b_idx} is not an object"),
        })?;
        if mode == ParseMode::Strict {
            reject_unknown(bobj, &["i", "j", "type"], line, &format!("bond {b_idx}"))?;
        }
        let i = get_u64(bobj, "i", line, &format!("record `{id}` bond {b_idx}"))? as usize;
        let j = get_u64(bobj, "j", line, &format!("record `{id}` bond {b_idx}"))? as usize;
        let type_str = bobj
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Parse {
                line,
                msg: format!("record `{id}`: bond {b_idx} missing `type`"),
            })?;
        let bond_type = BondType::from_wire(type_str).ok_or_else(|| Error::Parse {
            line,
            msg: format!("record `{id}`: bond {b_idx} has unknown type `{type_str}`"),
        })?;
        if i >= atoms.len() || j >= atoms.len() {
            return Err(Error::Parse {
                line,
                msg: format!(
                    "record `{id}`: bond {b_idx} index out of range ({i}, {j}) with {} atoms",
                    atoms.len()
                ),
            });
        }
        let bond = Bond::new(i, j, bond_type).map_err(|e| Error::Parse {
            line,
            msg: format!("record `{id}`: {e}"),
        })?;
        bonds.push(bond);
    }

    let confs_val = obj
        .get("conformers")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("record `{id}`: missing `conformers` array"),
        })?;
    let mut conformers = Vec::with_capacity(confs_val.len());
    for (c_idx, cv) in confs_val.iter().enumerate() {
        let cobj = cv.as_object().ok_or_else(|| Error::Parse {
            line,
            msg: format!("record `{id}`: conformer {c_idx} is not an object"),
        })?;
        if mode == ParseMode::Strict {
            reject_unknown(
                cobj,
                &["coords", "weight"],
                line,
                &format!("conformer {c_idx}"),
            )?;
        }
        let coords_val = cobj
            .get("coords")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse {
                line,
                msg: format!("record `{id}`: conformer {c_idx} missing `coords`"),
            })?;
        let mut coords = Vec::with_capacity(coords_val.len());
        for (r_idx, row) in coords_val.iter().enumerate() {
            let row = row.as_array().ok_or_else(|| Error::Parse {
                line,
                msg: format!("record `{id}`: conformer {c_idx} row {r_idx} is not an array"),
            })?;
            if row.len() != 3 {
                return Err(Error::Parse {
                    line,
                    msg: format!(
                        "record `{id}`: conformer {c_idx} row {r_idx} has {} components, expected 3",
                        row.len()
                    ),
                });
            }
            let mut xyz = [0.0; 3];
            for (k, comp) in row.iter().enumerate() {
                xyz[k] = get_f64(comp, line, &format!("record `{id}` conformer {c_idx}"))?;
            }
            coords.push(xyz);
        }
        let weight = get_f64(
            cobj.get("weight").unwrap_or(&Value::Null),
            line,
            &format!("record `{id}` conformer {c_idx} weight"),
        )?;
        conformers.push(Conformer { coords, weight });
    }

    let label = match obj.get("label") {
        None | Some(Value::Null) => None,
        Some(v) => Some(get_f64(v, line, &format!("record `{id}` label"))?),
    };

    let graph = Molecule2D { atoms, bonds };
    MoleculeRecord::new(id, graph, conformers, label).map_err(|e| Error::Parse {
        line,
        msg: e.to_string(),
    })
}

fn record_to_value(record: &MoleculeRecord) -> Value {
    let atoms: Vec<Value> = record
        .graph
        .atoms
        .iter()
        .map(|a| serde_json::json!({"z": a.atomic_number, "tag": a.tag}))
        .collect();
    let bonds: Vec<Value> = record
        .graph
        .bonds
        .iter()
        .map(|b| serde_json::json!({"i": b.i, "j": b.j, "type": b.bond_type.as_str()}))
        .collect();
    let conformers: Vec<Value> = record
        .conformers
        .iter()
        .map(|c| {
            let rows: Vec<Value> = c
                .coords
                .iter()
                .map(|xyz| serde_json::json!([xyz[0], xyz[1], xyz[2]]))
                .collect();
            serde_json::json!({"coords": rows, "weight": c.weight})
        })
        .collect();
    let mut obj = serde_json::json!({
        "id": record.id,
        "atoms": atoms,
        "bonds": bonds,
        "conformers": conformers,
    });
    if let Some(label) = record.label {
        obj.as_object_mut()
            .unwrap()
            .insert("label".into(), serde_json::json!(label));
    }
    obj
}

/// Serialize a dataset. Floats use the shortest representation that
/// round-trips to the same f64 bits, so parse(write(x)) == x exactly.
pub fn write_jsonl(
    path: &Path,
    header: Option<&DatasetHeader>,
    records: &[MoleculeRecord],
) -> Result<()> {
    let mut out = Vec::new();
    if let Some(header) = header {
        let line = serde_json::json!({ "header": header });
        serde_json::to_writer(&mut out, &line)?;
        out.push(b'\n');
    }
    for record in records {
        serde_json::to_writer(&mut out, &record_to_value(record))?;
        out.push(b'\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

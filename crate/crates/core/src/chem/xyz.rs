use std::fmt::Write as _;

use crate::chem::{atomic_number, element_symbol, ConformationSet, Molecule, Positions};
use crate::error::{Error, Result};

pub const BOHR_PER_ANGSTROM: f64 = 1.8897259886;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    #[default]
    Angstrom,
    Bohr,
}

impl LengthUnit {
    fn to_bohr(self) -> f64 {
        match self {
            LengthUnit::Angstrom => BOHR_PER_ANGSTROM,
            LengthUnit::Bohr => 1.0,
        }
    }
}

/// Parse one or more concatenated XYZ frames.
///
/// The first frame defines the template molecule (with the given total
/// charge); every later frame must list the same elements in the same order.
/// Frames with coincident nuclei are kept so that labeling can flag them.
pub fn parse_xyz(text: &str, unit: LengthUnit, charge: i32) -> Result<ConformationSet> {
    let lines: Vec<&str> = text.lines().collect();
    let scale = unit.to_bohr();
    let mut pos = 0;
    let mut composition: Option<Vec<u32>> = None;
    let mut frames = Vec::new();
    let mut comments = Vec::new();

    loop {
        while pos < lines.len() && lines[pos].trim().is_empty() {
            pos += 1;
        }
        if pos >= lines.len() {
            break;
        }
        let count_line = pos + 1;
        let count: usize = match lines[pos].trim().parse() {
            Ok(n) => n,
            Err(_) if !frames.is_empty() && looks_like_atom_row(lines[pos]) => {
                return Err(Error::FrameMismatch {
                    frame: frames.len() - 1,
                    line: count_line,
                    message: "more atom rows than the frame's count line declares".into(),
                });
            }
            Err(_) => return Err(Error::parse(count_line, format!("malformed count line `{}`", lines[pos].trim()))),
        };
        if count == 0 {
            return Err(Error::parse(count_line, "frame declares zero atoms"));
        }
        let frame = frames.len();
        let comment = lines.get(pos + 1).ok_or_else(|| Error::parse(count_line + 1, "missing comment line"))?;
        pos += 2;

        let mut zs = Vec::with_capacity(count);
        let mut coords = Vec::with_capacity(3 * count);
        for _ in 0..count {
            let line_no = pos + 1;
            let line = lines.get(pos).ok_or_else(|| Error::FrameMismatch {
                frame,
                line: line_no,
                message: format!("expected {count} atom rows, file ended"),
            })?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 4 {
                return Err(Error::FrameMismatch {
                    frame,
                    line: line_no,
                    message: format!("expected `symbol x y z`, got `{}`", line.trim()),
                });
            }
            let z = atomic_number(fields[0])
                .ok_or_else(|| Error::UnknownElement { line: line_no, symbol: fields[0].to_string() })?;
            zs.push(z);
            for f in &fields[1..4] {
                let v: f64 = f.parse().map_err(|_| Error::parse(line_no, format!("bad coordinate `{f}`")))?;
                coords.push(v * scale);
            }
            pos += 1;
        }

        match &composition {
            None => composition = Some(zs),
            Some(first) if *first != zs => {
                return Err(Error::FrameMismatch {
                    frame,
                    line: count_line,
                    message: "composition differs from the first frame".into(),
                });
            }
            Some(_) => {}
        }
        frames.push(Positions::from_row_slice(count, 3, &coords));
        comments.push(comment.trim_end().to_string());
    }

    let zs = composition.ok_or_else(|| Error::parse(1, "no frames"))?;
    let template = Molecule::new(zs, frames[0].clone(), charge)?;
    let mut set = ConformationSet::new(template, frames)?;
    set.comments = comments;
    Ok(set)
}

fn looks_like_atom_row(line: &str) -> bool {
    let fields: Vec<&str> = line.split_whitespace().collect();
    fields.len() >= 4 && fields[0].chars().all(|c| c.is_ascii_alphabetic())
}

/// Serialize every frame; comment lines are written back unchanged.
pub fn write_xyz(set: &ConformationSet, unit: LengthUnit) -> String {
    let scale = 1.0 / unit.to_bohr();
    let mut out = String::new();
    for (frame, comment) in set.frames.iter().zip(&set.comments) {
        let _ = writeln!(out, "{}", frame.nrows());
        let _ = writeln!(out, "{comment}");
        for (i, &z) in set.template.atomic_numbers().iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<2} {:>22.15} {:>22.15} {:>22.15}",
                element_symbol(z).unwrap_or("X"),
                frame[(i, 0)] * scale,
                frame[(i, 1)] * scale,
                frame[(i, 2)] * scale
            );
        }
    }
    out
}

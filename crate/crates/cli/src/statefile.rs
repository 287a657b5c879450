//! State files: header `J M re im`, one row per basis level in basis order.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use rotor_core::basis::{build_basis, RotorState};
use rotor_core::textio::{format_number, read_table, write_row};
use rotor_core::{Result, RotorError};

pub fn write_state<W: Write>(state: &RotorState, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "J M re im")?;
    for (i, j, m) in state.basis().levels() {
        let c = state.amplitudes()[i];
        write_row(out, &[j.to_string(), m.to_string(), format_number(c.re), format_number(c.im)])?;
    }
    Ok(())
}

/// The basis is sized by the largest J present; absent levels are zero.
pub fn read_state<R: BufRead>(input: R) -> Result<RotorState> {
    let table = read_table(input)?;
    if table.header != ["J", "M", "re", "im"] {
        return Err(RotorError::Parse { line: 1, message: format!("expected header 'J M re im', found {:?}", table.header.join(" ")) });
    }
    if table.rows.is_empty() {
        return Err(RotorError::Parse { line: 2, message: "state file has no amplitudes".into() });
    }
    let mut levels = Vec::with_capacity(table.rows.len());
    for (r, row) in table.rows.iter().enumerate() {
        let (j, m) = (row[0], row[1]);
        if j.fract() != 0.0 || m.fract() != 0.0 || j < 0.0 || m.abs() > j {
            return Err(RotorError::Parse { line: r + 2, message: format!("({j}, {m}) is not a valid (J, M) pair") });
        }
        levels.push((j as u32, m as i32, Complex64::new(row[2], row[3])));
    }
    let j_max = levels.iter().map(|l| l.0).max().expect("non-empty");
    let mut state = RotorState::zeros(build_basis(j_max));
    let mut seen = vec![false; state.basis().dim()];
    for (r, (j, m, c)) in levels.into_iter().enumerate() {
        let i = state.basis().index(j, m).expect("validated above");
        if std::mem::replace(&mut seen[i], true) {
            return Err(RotorError::Parse { line: r + 2, message: format!("level ({j}, {m}) appears twice") });
        }
        state.set_amplitude(j, m, c)?;
    }
    Ok(state)
}

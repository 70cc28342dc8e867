use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The penalized risk has no minimizer over the requested domain.
    #[error("non-attainment: minimum not attained ({reason}); divergent coordinates: {}", format_coords(.coordinates))]
    NonAttainment {
        reason: String,
        coordinates: Vec<usize>,
    },

    #[error("problem too large for this routine: n = {n}, limit = {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("infeasible configuration: {0}")]
    Infeasible(String),
}

fn format_coords(coords: &[usize]) -> String {
    const SHOWN: usize = 16;
    let mut out: Vec<String> = coords.iter().take(SHOWN).map(|c| c.to_string()).collect();
    if coords.len() > SHOWN {
        out.push(format!("... ({} total)", coords.len()));
    }
    out.join(",")
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension { expected, found });
    }
    Ok(())
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} has a non-finite entry at index {i}"
        )));
    }
    Ok(())
}

use serde::{Deserialize, Serialize};

use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum NaiveMethod {
    LastValue,
    SeasonalNaive { period: usize },
}

pub fn naive_forecast(history: &[f64], horizon: usize, method: NaiveMethod) -> Result<Vec<f64>, BenchError> {
    if history.is_empty() {
        return Err(BenchError::Config("naive forecast needs a nonempty history".into()));
    }
    match method {
        NaiveMethod::LastValue => Ok(vec![history[history.len() - 1]; horizon]),
        NaiveMethod::SeasonalNaive { period } => {
            if period == 0 || period > history.len() {
                return Err(BenchError::Config(format!("period {period} not in 1..={}", history.len())));
            }
            let season = &history[history.len() - period..];
            Ok(season.iter().copied().cycle().take(horizon).collect())
        }
    }
}

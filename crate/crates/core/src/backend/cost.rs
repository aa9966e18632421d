//! Token pricing ledger.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BackendError, Usage};

/// Price in currency units per 1000 tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPrice {
    pub prompt_per_1k: f64,
    pub completion_per_1k: f64,
}

/// Model name -> price. Lookups fall back to a case-insensitive match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostTable(BTreeMap<String, ModelPrice>);

impl Default for CostTable {
    /// Published per-1K-token list prices (USD) for the evaluated models.
    fn default() -> Self {
        let rows: [(&str, f64, f64); 8] = [
            ("GPT-4", 0.03, 0.06),
            ("GPT-3.5-Turbo-Instruct", 0.0015, 0.002),
            ("Claude-3-Opus", 0.032, 0.16),
            ("Claude-3.5-Haiku", 0.00233, 0.01167),
            ("Claude-3.5-Sonnet", 0.007, 0.035),
            ("Deepseek-V3", 0.0005, 0.002),
            ("GLM-4-Air", 0.0005, 0.0005),
            ("Qwen3-4B", 0.00021, 0.00084),
        ];
        Self(
            rows.into_iter()
                .map(|(m, p, c)| (m.to_owned(), ModelPrice { prompt_per_1k: p, completion_per_1k: c }))
                .collect(),
        )
    }
}

impl CostTable {
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let table: CostTable =
            serde_json::from_str(text).map_err(|e| BackendError::Config(format!("bad cost table: {e}")))?;
        if let Some((m, _)) = table.0.iter().find(|(_, p)| !(p.prompt_per_1k >= 0.0 && p.completion_per_1k >= 0.0)) {
            return Err(BackendError::Config(format!("negative price for `{m}`")));
        }
        Ok(table)
    }

    pub fn get(&self, model: &str) -> Option<&ModelPrice> {
        self.0.get(model).or_else(|| self.0.iter().find(|(name, _)| name.eq_ignore_ascii_case(model)).map(|(_, p)| p))
    }

    pub fn insert(&mut self, model: impl Into<String>, price: ModelPrice) {
        self.0.insert(model.into(), price);
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

/// Cost of `usage` on `model`; `None` when the model has no price.
pub fn estimate_cost(usage: &Usage, model: &str, table: &CostTable) -> Option<f64> {
    let price = table.get(model)?;
    Some(
        usage.prompt_tokens as f64 / 1000.0 * price.prompt_per_1k
            + usage.completion_tokens as f64 / 1000.0 * price.completion_per_1k,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn usage(p: u64, c: u64) -> Usage {
        Usage { prompt_tokens: p, completion_tokens: c, requests: 1 }
    }

    #[test]
    fn reproduces_list_price_arithmetic() {
        let t = CostTable::default();
        let gpt = estimate_cost(&usage(2000, 500), "GPT-3.5-Turbo-Instruct", &t).unwrap();
        assert!((gpt - 0.004).abs() < 1e-12);
        let opus = estimate_cost(&usage(1000, 1000), "Claude-3-Opus", &t).unwrap();
        assert!((opus - 0.192).abs() < 1e-12);
        assert_eq!(estimate_cost(&usage(0, 0), "GPT-4", &t), Some(0.0));
    }

    #[test]
    fn lookup_is_case_insensitive_and_unknown_is_none() {
        let t = CostTable::default();
        assert!(estimate_cost(&usage(1, 1), "gpt-3.5-turbo-instruct", &t).is_some());
        assert_eq!(estimate_cost(&usage(0, 0), "mystery-model", &t), None);
    }

    #[test]
    fn json_table_round_trips_and_rejects_negative_prices() {
        let t = CostTable::default();
        let back = CostTable::from_json(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
        assert!(CostTable::from_json(r#"{"m":{"prompt_per_1k":-1,"completion_per_1k":0}}"#).is_err());
    }
}

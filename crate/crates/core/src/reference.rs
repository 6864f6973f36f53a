//! Published reference results, echoed into reports for side-by-side reading.
//! None of these are computed here.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    /// Experiment group, e.g. `"heaviside"` or `"pinn"`.
    pub group: &'static str,
    pub model: &'static str,
    pub table: &'static str,
    pub mse: f64,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub time_s: Option<f64>,
}

/// Serializable copy of a [`Reference`] stored inside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub model: String,
    pub citation: String,
    pub mse: f64,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub time_s: Option<f64>,
    pub note: String,
}

impl From<&Reference> for ReferenceRow {
    fn from(r: &Reference) -> Self {
        Self {
            model: r.model.to_string(),
            citation: format!("published reference, {}", r.table),
            mse: r.mse,
            rmse: r.rmse,
            mae: r.mae,
            time_s: r.time_s,
            note: "reference, not computed".to_string(),
        }
    }
}

const fn full(
    group: &'static str,
    model: &'static str,
    table: &'static str,
    v: [f64; 4],
) -> Reference {
    Reference {
        group,
        model,
        table,
        mse: v[0],
        rmse: Some(v[1]),
        mae: Some(v[2]),
        time_s: Some(v[3]),
    }
}

const fn errs(
    group: &'static str,
    model: &'static str,
    table: &'static str,
    v: [f64; 3],
) -> Reference {
    Reference {
        group,
        model,
        table,
        mse: v[0],
        rmse: Some(v[1]),
        mae: Some(v[2]),
        time_s: None,
    }
}

pub const REFERENCES: &[Reference] = &[
    errs(
        "heaviside",
        "XNet (64)",
        "Table 2",
        [8.99e-08, 3.00e-04, 1.91e-04],
    ),
    errs(
        "heaviside",
        "KAN [1,1], G=200",
        "Table 2",
        [5.98e-04, 2.45e-02, 3.03e-03],
    ),
    errs(
        "heaviside",
        "B-spline k=3, G=200",
        "Table 11",
        [1.1252e-03, 3.3544e-02, 4.4737e-03],
    ),
    full(
        "exp_sin_2d",
        "XNet (5000)",
        "Table 3",
        [3.9767e-07, 6.3061e-04, 4.0538e-04, 61.0],
    ),
    full(
        "exp_sin_2d",
        "KAN [2,1,1]",
        "Table 3",
        [3.0227e-07, 5.4979e-04, 1.6344e-04, 56.1],
    ),
    full(
        "xy",
        "XNet (5000)",
        "Table 4",
        [2.1544e-08, 1.4678e-04, 1.0439e-04, 61.8],
    ),
    full(
        "xy",
        "KAN [2,2,1]",
        "Table 4",
        [4.9306e-08, 2.2205e-04, 1.4963e-04, 62.4],
    ),
    full(
        "exp_4d",
        "XNet (5000)",
        "Table 5",
        [2.3079e-06, 1.5192e-03, 8.3852e-04, 78.18],
    ),
    full(
        "exp_4d",
        "KAN [4,2,2,1]",
        "Table 5",
        [2.6151e-03, 5.1138e-02, 3.6300e-02, 143.1],
    ),
    full(
        "exp_100d",
        "XNet (5000)",
        "Table 6",
        [6.8492e-04, 2.6171e-02, 2.0889e-02, 158.69],
    ),
    full(
        "exp_100d",
        "KAN [100,1,1]",
        "Table 6",
        [6.5868e-03, 8.1159e-02, 6.4611e-02, 556.5],
    ),
    full(
        "pinn",
        "PINN [2,20,20,1]",
        "Table 7",
        [1.7998e-05, 4.2424e-03, 2.3300e-03, 48.9],
    ),
    full(
        "pinn",
        "XNet (20)",
        "Table 7",
        [1.8651e-08, 1.3657e-04, 1.0511e-04, 57.2],
    ),
    full(
        "pinn",
        "KAN [2,10,1]",
        "Table 7",
        [5.7430e-08, 2.3965e-04, 1.8450e-04, 286.3],
    ),
    full(
        "pinn",
        "XNet (200)",
        "Table 7",
        [1.0937e-09, 3.3071e-05, 2.1711e-05, 154.8],
    ),
    full(
        "series_noise_0",
        "LSTM",
        "Table 8",
        [1.5925e-07, 3.9906e-04, 3.9906e-04, 9.01],
    ),
    full(
        "series_noise_0",
        "XLSTM",
        "Table 8",
        [3.4252e-11, 5.8525e-06, 5.8457e-06, 9.42],
    ),
    full(
        "series_noise_0",
        "KAN [5,64,1]",
        "Table 8",
        [9.8281e-13, 9.9137e-07, 8.0000e-07, 11.63],
    ),
    full(
        "series_noise_0.05",
        "LSTM",
        "Table 9",
        [2.5919e-03, 5.0911e-02, 3.8814e-02, 9.07],
    ),
    full(
        "series_noise_0.05",
        "XLSTM",
        "Table 9",
        [2.2080e-03, 4.6990e-02, 3.7182e-02, 9.56],
    ),
    full(
        "series_noise_0.05",
        "KAN [5,64,1]",
        "Table 9",
        [4.6537e-03, 6.8218e-02, 5.3703e-02, 11.59],
    ),
    full(
        "stock",
        "LSTM",
        "Table 10",
        [3.3768e-01, 5.8110e-01, 4.8787e-01, 8.9574],
    ),
    full(
        "stock",
        "XLSTM",
        "Table 10",
        [2.3878e-01, 4.8865e-01, 3.3764e-01, 10.1159],
    ),
    full(
        "stock",
        "KAN [10,64,1]",
        "Table 10",
        [8.5918e-01, 9.2692e-01, 5.9108e-01, 11.7505],
    ),
];

pub fn references_for(group: &str) -> Vec<ReferenceRow> {
    REFERENCES
        .iter()
        .filter(|r| r.group == group)
        .map(ReferenceRow::from)
        .collect()
}

/// Looks up one published MSE by group and exact model label.
pub fn reference_mse(group: &str, model: &str) -> Option<f64> {
    REFERENCES
        .iter()
        .find(|r| r.group == group && r.model == model)
        .map(|r| r.mse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_rows_are_self_consistent() {
        for r in REFERENCES {
            if let Some(rmse) = r.rmse {
                // Published RMSE is rounded to 5 significant digits.
                assert!(
                    (rmse * rmse / r.mse - 1.0).abs() < 2e-2,
                    "{} {}",
                    r.group,
                    r.model
                );
                assert!(r.mae.unwrap() <= rmse * 1.0001, "{} {}", r.group, r.model);
            }
        }
    }

    #[test]
    fn lookup() {
        assert_eq!(reference_mse("pinn", "XNet (200)"), Some(1.0937e-09));
        assert_eq!(references_for("stock").len(), 3);
        assert!(references_for("xy")
            .iter()
            .all(|r| r.note.contains("not computed")));
    }
}

use serde_json::{json, Value};

pub fn schemas() -> Value {
    json!({
        "wide_csv": {
            "description": "One row per individual; cells from the first censored interval on are NA.",
            "columns": [
                "id", "a", "[a_y, a_d] for four-arm data", "l0_<name>...",
                "l_<k>_<name> for k=0..K", "y_<k>", "d_<k>", "c_<k>"
            ],
            "order_within_interval": ["C_k", "D_k", "dY_k", "L_k"]
        },
        "long_csv": {
            "description": "One row per event; covariate rows give the new vector from `stop` on.",
            "columns": ["id", "a", "[a_y, a_d]", "l0_<name>...", "start", "stop", "event", "mark"],
            "event": ["recurrent", "death", "censor", "covariate"],
            "mark": "semicolon-separated name=value pairs on covariate rows, empty otherwise"
        },
        "estimand_spec": {
            "kind": [
                "total_effect", "total_effect_survival", "controlled_direct", "separable",
                "separable_survival", "while_alive", "average_individual_rate", "composite_sum", "reverse_count"
            ],
            "fields": {
                "a": "arm for single-arm estimands",
                "a_y, a_d": "arms of separable estimands",
                "weight_d, weight_y": "composite_sum weights",
                "m": "reverse_count cap",
                "horizon": "last grid index"
            }
        },
        "curve_estimate": {
            "fields": {
                "spec": "estimand_spec",
                "engine": "risk-set | hajek | ht | gformula | ipw | exact | monte-carlo",
                "times": "grid times 0..=horizon",
                "y": "expected recurrent count",
                "s": "survival factor of the recursion; 1 - d for discrete and oracle curves, identically 1 for hajek/ht",
                "d": "cumulative incidence of the competing event",
                "composite": "optional composite value curve",
                "ci": "optional percentile bands {level, y, s, d, composite} with {lower, upper}",
                "se": "optional standard errors {y, s, d, composite}",
                "meta": "sample sizes, options, truncation flags and provenance"
            }
        },
        "curve_csv": ["time", "y", "s", "d", "[composite]", "[<component>_lower, <component>_upper]..."],
        "report": {
            "fields": ["spec", "engine", "se_source", "rows", "max_abs_error", "max_abs_error_over_se"],
            "row": ["time", "estimate", "truth", "error", "se", "error_over_se"]
        },
        "dgp_config": {
            "format": "TOML",
            "keys": {
                "p_l0": "P(L0 = 1)",
                "beta_l1_ay": "P(L1 = 1) = 0.5 + (2 a_y - 1) beta_l1_ay",
                "arm_assignment": "two-arm | four-arm",
                "n_per_arm": "individuals per arm",
                "seed": "u64",
                "grid": "{k_max, delta_t, origin}",
                "beta_c": "{intercept}",
                "beta_d": "{intercept, a, l0, l1, y, ld}",
                "beta_y": "{intercept, l0, l1, ld}",
                "ld_process": "optional {intercept, a}: absorbing binary L_D onset"
            }
        },
        "error": {
            "stream": "stderr",
            "fields": ["error", "class", "exit_code", "message"],
            "exit_codes": {"usage": 2, "validation": 3, "positivity": 4, "numeric": 5}
        }
    })
}

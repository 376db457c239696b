//! JSON schemas (draft 2020-12) of the API responses.

use serde_json::{json, Value};

fn number() -> Value {
    json!({ "type": "number" })
}

fn count() -> Value {
    json!({ "type": "integer", "minimum": 0 })
}

fn unit() -> Value {
    json!({ "type": "number", "minimum": 0, "maximum": 1 })
}

fn strings() -> Value {
    json!({ "type": "array", "items": { "type": "string" } })
}

fn counts() -> Value {
    json!({ "type": "array", "items": count() })
}

fn object(properties: Value) -> Value {
    let required: Vec<String> = properties
        .as_object()
        .map(|m| m.keys().cloned().collect())
        .unwrap_or_default();
    json!({ "type": "object", "properties": properties, "required": required })
}

fn matrix_row() -> Value {
    let cell = object(json!({
        "variable": count(),
        "low": number(),
        "high": number(),
        "counts": counts(),
    }));
    object(json!({
        "pattern_id": count(),
        "class": { "type": "string" },
        "support": unit(),
        "support_encoded": unit(),
        "support_count": count(),
        "cumulative_coverage": unit(),
        "coverage_encoded": unit(),
        "fet_p": unit(),
        "fet_significant": { "type": "boolean" },
        "aggregated_from": { "type": "integer", "minimum": 1 },
        "cells": { "type": "array", "items": cell },
    }))
}

fn order() -> Value {
    json!({ "enum": ["support", "class", "class_and_support"] })
}

pub fn meta() -> Value {
    let variable = json!({
        "type": "object",
        "properties": {
            "name": { "type": "string" },
            "importance": unit(),
            "importance_encoded": unit(),
            "edges": { "type": "array", "items": number(), "minItems": 2 },
            "categories": strings(),
        },
        "required": ["name", "importance", "importance_encoded", "edges"],
    });
    let dataset = object(json!({
        "fingerprint": { "type": "string" },
        "label_column": { "type": "string" },
        "n_rows": count(),
        "n_vars": count(),
        "classes": strings(),
        "class_sizes": counts(),
        "variables": strings(),
    }));
    object(json!({
        "dataset": dataset,
        "classes": strings(),
        "variables": { "type": "array", "items": variable },
        "coverage": unit(),
        "lambda_grid": { "type": "array", "items": unit() },
        "recommended_lambda": { "type": ["number", "null"], "minimum": 0, "maximum": 1 },
        "manifest": { "type": "object" },
    }))
}

pub fn patterns() -> Value {
    object(json!({
        "order": order(),
        "total": count(),
        "rows": { "type": "array", "items": matrix_row() },
    }))
}

pub fn map() -> Value {
    let point = object(json!({
        "instance_id": { "type": "string" },
        "x": number(),
        "y": number(),
        "class": { "type": "string" },
        "pattern_id": { "type": ["integer", "null"], "minimum": 0 },
    }));
    object(json!({
        "requested": { "type": "string" },
        "lambda": unit(),
        "stress": unit(),
        "silhouette_inverted": unit(),
        "points": { "type": "array", "items": point },
    }))
}

pub fn selection() -> Value {
    let instance = object(json!({
        "instance_id": { "type": "string" },
        "pattern_id": { "type": ["integer", "null"], "minimum": 0 },
    }));
    object(json!({
        "instances": { "type": "array", "items": instance },
        "pattern_ids": counts(),
        "unsupported": strings(),
        "rows": { "type": "array", "items": matrix_row() },
        "filter": object(json!({ "instances": strings() })),
    }))
}

pub fn error() -> Value {
    object(json!({ "error": { "type": "string" } }))
}

/// All schemas keyed by route name.
pub fn all() -> Value {
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "meta": meta(),
        "patterns": patterns(),
        "map": map(),
        "selection": selection(),
        "error": error(),
    })
}

//! Flat `key = value` scenario files.
//!
//! Keys are the scenario field names (`n`, `idle_slot`, `w0`, `p_e`, ...).
//! Durations are written in microseconds and rates in bits per second.
//! `preset = <name>` may appear first to pick the base values; otherwise the
//! `dot11b-dsss` preset is the base. `#` starts a comment.

use crate::error::ParamError;
use crate::params::Scenario;

/// Every key accepted by [`apply_key`], in file order.
pub const KEYS: &[&str] = &[
    "n",
    "idle_slot",
    "sifs",
    "difs",
    "prop_delay",
    "plcp_header_bits",
    "preamble_bits",
    "data_rate",
    "basic_rate",
    "plcp_rate",
    "w0",
    "m",
    "m_prime",
    "access_mode",
    "lambda",
    "payload_bits",
    "ip_header_bits",
    "transport_header_bits",
    "queue_len",
    "p_e",
    "capture_enabled",
    "z",
    "s",
    "data_mac_bits",
    "ack_bits",
    "rts_bits",
    "cts_bits",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ParamError> {
    value
        .parse()
        .map_err(|_| ParamError::Parse(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ParamError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ParamError::Parse(format!(
            "bad value `{value}` for `{key}`"
        ))),
    }
}

fn micros(key: &str, value: &str) -> Result<f64, ParamError> {
    Ok(parse::<f64>(key, value)? * 1e-6)
}

/// Sets a single field from its textual form.
pub fn apply_key(scenario: &mut Scenario, key: &str, value: &str) -> Result<(), ParamError> {
    let s = scenario;
    match key {
        "n" => s.n = parse(key, value)?,
        "idle_slot" => s.phy.idle_slot = micros(key, value)?,
        "sifs" => s.phy.sifs = micros(key, value)?,
        "difs" => s.phy.difs = micros(key, value)?,
        "prop_delay" => s.phy.prop_delay = micros(key, value)?,
        "plcp_header_bits" => s.phy.plcp_header_bits = parse(key, value)?,
        "preamble_bits" => s.phy.preamble_bits = parse(key, value)?,
        "data_rate" => s.phy.data_rate = parse(key, value)?,
        "basic_rate" => s.phy.basic_rate = parse(key, value)?,
        "plcp_rate" => s.phy.plcp_rate = parse(key, value)?,
        "w0" => s.protocol.w0 = parse(key, value)?,
        "m" => s.protocol.m = parse(key, value)?,
        "m_prime" => s.protocol.m_prime = parse(key, value)?,
        "access_mode" => s.protocol.access_mode = value.parse()?,
        "lambda" => s.traffic.lambda = parse(key, value)?,
        "payload_bits" => s.traffic.payload_bits = parse(key, value)?,
        "ip_header_bits" => s.traffic.ip_header_bits = parse(key, value)?,
        "transport_header_bits" => s.traffic.transport_header_bits = parse(key, value)?,
        "queue_len" => s.traffic.queue_len = parse(key, value)?,
        "p_e" => s.channel.p_e = parse(key, value)?,
        "capture_enabled" => s.channel.capture_enabled = parse_bool(key, value)?,
        "z" => s.channel.z = parse(key, value)?,
        "s" => s.channel.s = parse(key, value)?,
        "data_mac_bits" => s.mac_overhead.data_bits = parse(key, value)?,
        "ack_bits" => s.mac_overhead.ack_bits = parse(key, value)?,
        "rts_bits" => s.mac_overhead.rts_bits = parse(key, value)?,
        "cts_bits" => s.mac_overhead.cts_bits = parse(key, value)?,
        other => return Err(ParamError::Parse(format!("unknown key `{other}`"))),
    }
    Ok(())
}

/// Parses a scenario file body. The result is validated.
pub fn parse_scenario(text: &str) -> Result<Scenario, ParamError> {
    let mut scenario: Option<Scenario> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            ParamError::Parse(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key == "preset" {
            if scenario.is_some() {
                return Err(ParamError::Parse(format!(
                    "line {}: `preset` must come before other keys",
                    lineno + 1
                )));
            }
            scenario = Some(Scenario::preset(value)?);
            continue;
        }
        let s = scenario.get_or_insert_with(Scenario::dot11b_dsss);
        apply_key(s, key, value)
            .map_err(|e| ParamError::Parse(format!("line {}: {e}", lineno + 1)))?;
    }
    let scenario = scenario.unwrap_or_default();
    scenario.validate()?;
    Ok(scenario)
}

/// Renders a scenario in the file format; `parse_scenario` reads it back.
pub fn to_config_string(s: &Scenario) -> String {
    let us = |x: f64| x * 1e6;
    let access = match s.protocol.access_mode {
        crate::params::AccessMode::Basic => "basic",
        crate::params::AccessMode::RtsCts => "rtscts",
    };
    let values: Vec<String> = vec![
        s.n.to_string(),
        us(s.phy.idle_slot).to_string(),
        us(s.phy.sifs).to_string(),
        us(s.phy.difs).to_string(),
        us(s.phy.prop_delay).to_string(),
        s.phy.plcp_header_bits.to_string(),
        s.phy.preamble_bits.to_string(),
        s.phy.data_rate.to_string(),
        s.phy.basic_rate.to_string(),
        s.phy.plcp_rate.to_string(),
        s.protocol.w0.to_string(),
        s.protocol.m.to_string(),
        s.protocol.m_prime.to_string(),
        access.to_string(),
        s.traffic.lambda.to_string(),
        s.traffic.payload_bits.to_string(),
        s.traffic.ip_header_bits.to_string(),
        s.traffic.transport_header_bits.to_string(),
        s.traffic.queue_len.to_string(),
        s.channel.p_e.to_string(),
        s.channel.capture_enabled.to_string(),
        s.channel.z.to_string(),
        s.channel.s.to_string(),
        s.mac_overhead.data_bits.to_string(),
        s.mac_overhead.ack_bits.to_string(),
        s.mac_overhead.rts_bits.to_string(),
        s.mac_overhead.cts_bits.to_string(),
    ];
    KEYS.iter()
        .zip(values)
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

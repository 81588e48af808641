//! Scenario inputs and the deterministic timing algebra.
//!
//! All durations are `f64` seconds and all rates are bits per second. Frame
//! bodies are sized in bits; the PHY preamble and PLCP header always go out
//! at `plcp_rate`, control frame bodies at `basic_rate`, and the data frame
//! body at `data_rate`.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// Physical-layer timing and rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhyTimings {
    pub idle_slot: f64,
    pub sifs: f64,
    pub difs: f64,
    pub prop_delay: f64,
    pub plcp_header_bits: u32,
    pub preamble_bits: u32,
    pub data_rate: f64,
    pub basic_rate: f64,
    pub plcp_rate: f64,
}

impl PhyTimings {
    /// 802.11b DSSS long-preamble timings at 1 Mbps.
    pub fn dot11b_dsss() -> Self {
        PhyTimings {
            idle_slot: 20e-6,
            sifs: 10e-6,
            difs: 50e-6,
            prop_delay: 1e-6,
            plcp_header_bits: 144,
            preamble_bits: 48,
            data_rate: 1e6,
            basic_rate: 1e6,
            plcp_rate: 1e6,
        }
    }

    /// Time spent on preamble + PLCP header for any frame.
    pub fn phy_overhead(&self) -> f64 {
        f64::from(self.preamble_bits + self.plcp_header_bits) / self.plcp_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessMode {
    Basic,
    RtsCts,
}

impl std::str::FromStr for AccessMode {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "basic" => Ok(AccessMode::Basic),
            "rtscts" | "rts-cts" | "rts_cts" | "rts/cts" => Ok(AccessMode::RtsCts),
            other => Err(ParamError::Parse(format!("unknown access mode `{other}`"))),
        }
    }
}

/// Backoff configuration: initial window `w0`, retry limit `m` and the
/// window-doubling cap `m_prime`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub w0: u32,
    pub m: u32,
    pub m_prime: u32,
    pub access_mode: AccessMode,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            w0: 32,
            m: 7,
            m_prime: 5,
            access_mode: AccessMode::Basic,
        }
    }
}

/// Offered load and packet layout. `queue_len` is the station buffer
/// capacity, head-of-queue packet included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub lambda: f64,
    pub payload_bits: u32,
    pub ip_header_bits: u32,
    pub transport_header_bits: u32,
    pub queue_len: u32,
}

impl TrafficConfig {
    /// Bits credited to throughput per delivered packet (`l_D + l_I + l_U`).
    pub fn packet_bits(&self) -> u32 {
        self.payload_bits + self.ip_header_bits + self.transport_header_bits
    }
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            lambda: 5.0,
            payload_bits: 8000,
            ip_header_bits: 160,
            transport_header_bits: 64,
            queue_len: 50,
        }
    }
}

/// Channel impairments: packet error rate and optional power capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub p_e: f64,
    pub capture_enabled: bool,
    pub z: f64,
    pub s: u32,
}

impl ChannelConfig {
    /// Inverse processing gain of a correlation receiver, `2 / (3 s)`.
    pub fn processing_gain_inverse(&self) -> f64 {
        2.0 / (3.0 * f64::from(self.s))
    }
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            p_e: 0.0,
            capture_enabled: false,
            z: 4.0,
            s: 11,
        }
    }
}

/// MAC-level frame body sizes in bits. The data entry covers MAC header
/// plus FCS; control frame entries are the whole MAC frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacOverhead {
    pub data_bits: u32,
    pub ack_bits: u32,
    pub rts_bits: u32,
    pub cts_bits: u32,
}

impl Default for MacOverhead {
    fn default() -> Self {
        MacOverhead {
            data_bits: 224,
            ack_bits: 112,
            rts_bits: 160,
            cts_bits: 112,
        }
    }
}

/// Full input bundle for one homogeneous network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: u32,
    pub phy: PhyTimings,
    pub protocol: ProtocolConfig,
    pub traffic: TrafficConfig,
    pub channel: ChannelConfig,
    pub mac_overhead: MacOverhead,
}

/// Named presets accepted by [`Scenario::preset`].
pub const PRESETS: &[&str] = &["dot11b-dsss"];

impl Scenario {
    /// 802.11b DSSS timings with ten stations, `W = 32`, `m = 7`, `m' = 5`
    /// and a 1000-byte UDP/IPv4 payload.
    pub fn dot11b_dsss() -> Self {
        Scenario {
            n: 10,
            phy: PhyTimings::dot11b_dsss(),
            protocol: ProtocolConfig::default(),
            traffic: TrafficConfig::default(),
            channel: ChannelConfig::default(),
            mac_overhead: MacOverhead::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self, ParamError> {
        match name {
            "dot11b-dsss" => Ok(Self::dot11b_dsss()),
            other => Err(ParamError::UnknownPreset(other.to_string())),
        }
    }

    /// Checks every field invariant, reporting the first one violated.
    pub fn validate(&self) -> Result<(), ParamError> {
        fn check(ok: bool, msg: &'static str) -> Result<(), ParamError> {
            if ok {
                Ok(())
            } else {
                Err(ParamError::Invalid(msg))
            }
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;

        check(self.n >= 1, "n must be ≥ 1")?;

        let phy = &self.phy;
        check(positive(phy.idle_slot), "idle_slot must be > 0")?;
        check(positive(phy.sifs), "sifs must be > 0")?;
        check(positive(phy.difs), "difs must be > 0")?;
        check(positive(phy.prop_delay), "prop_delay must be > 0")?;
        check(phy.plcp_header_bits > 0, "plcp_header_bits must be > 0")?;
        check(phy.preamble_bits > 0, "preamble_bits must be > 0")?;
        check(positive(phy.data_rate), "data_rate must be > 0")?;
        check(positive(phy.basic_rate), "basic_rate must be > 0")?;
        check(positive(phy.plcp_rate), "plcp_rate must be > 0")?;
        check(phy.difs > phy.sifs, "difs must exceed sifs")?;

        let proto = &self.protocol;
        check(proto.w0 >= 1, "w0 must be ≥ 1")?;
        check(proto.m_prime <= proto.m, "m_prime exceeds m")?;
        check(
            proto.m_prime < 32 && (u64::from(proto.w0) << proto.m_prime) <= u64::from(u32::MAX),
            "contention window 2^m_prime·w0 overflows",
        )?;

        let traffic = &self.traffic;
        check(
            traffic.lambda.is_finite() && traffic.lambda >= 0.0,
            "lambda must be ≥ 0",
        )?;
        check(traffic.queue_len >= 1, "queue_len must be ≥ 1")?;

        let ch = &self.channel;
        check((0.0..=1.0).contains(&ch.p_e), "p_e must lie in [0, 1]")?;
        check(
            !ch.capture_enabled || positive(ch.z),
            "z must be > 0 when capture is enabled",
        )?;
        check(ch.s >= 1, "s must be ≥ 1")?;
        Ok(())
    }

    pub fn frame_duration(&self, kind: FrameKind) -> f64 {
        frame_duration(kind, self)
    }

    /// Component durations of one frame exchange.
    pub fn exchange(&self) -> Exchange {
        Exchange {
            difs: self.phy.difs,
            sifs: self.phy.sifs,
            prop_delay: self.phy.prop_delay,
            data: frame_duration(FrameKind::Data, self),
            ack: frame_duration(FrameKind::Ack, self),
            rts: frame_duration(FrameKind::Rts, self),
            cts: frame_duration(FrameKind::Cts, self),
        }
    }

    pub fn success_duration(&self) -> f64 {
        self.exchange().success(self.protocol.access_mode)
    }

    pub fn failure_duration(&self) -> f64 {
        self.exchange().failure(self.protocol.access_mode)
    }

    pub fn window_at_stage(&self, stage: u32) -> Result<u32, ParamError> {
        window_at_stage(stage, &self.protocol)
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Self::dot11b_dsss()
    }
}

/// Validates and hands back the scenario.
pub fn validate(scenario: Scenario) -> Result<Scenario, ParamError> {
    scenario.validate()?;
    Ok(scenario)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Data,
    Ack,
    Rts,
    Cts,
}

/// Airtime of one frame: PHY overhead plus MAC body at the frame's rate.
pub fn frame_duration(kind: FrameKind, scenario: &Scenario) -> f64 {
    let phy = &scenario.phy;
    let mac = &scenario.mac_overhead;
    let body = match kind {
        FrameKind::Data => {
            let t = &scenario.traffic;
            f64::from(mac.data_bits + t.ip_header_bits + t.transport_header_bits + t.payload_bits)
                / phy.data_rate
        }
        FrameKind::Ack => f64::from(mac.ack_bits) / phy.basic_rate,
        FrameKind::Rts => f64::from(mac.rts_bits) / phy.basic_rate,
        FrameKind::Cts => f64::from(mac.cts_bits) / phy.basic_rate,
    };
    phy.phy_overhead() + body
}

/// The pieces `t_S` and `t_F` are assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exchange {
    pub difs: f64,
    pub sifs: f64,
    pub prop_delay: f64,
    pub data: f64,
    pub ack: f64,
    pub rts: f64,
    pub cts: f64,
}

impl Exchange {
    /// `t_S`: time until the ACK of a successful exchange has arrived.
    pub fn success(&self, mode: AccessMode) -> f64 {
        let data_ack = self.data + self.prop_delay + self.sifs + self.ack + self.prop_delay;
        match mode {
            AccessMode::Basic => self.difs + data_ack,
            AccessMode::RtsCts => {
                self.difs
                    + self.rts
                    + self.prop_delay
                    + self.sifs
                    + self.cts
                    + self.prop_delay
                    + self.sifs
                    + data_ack
            }
        }
    }

    /// `t_F`: time a sender waits before it considers the attempt failed.
    pub fn failure(&self, mode: AccessMode) -> f64 {
        match mode {
            AccessMode::Basic => {
                self.difs + self.data + self.prop_delay + self.sifs + self.ack + self.prop_delay
            }
            AccessMode::RtsCts => {
                self.difs + self.rts + self.prop_delay + self.sifs + self.cts + self.prop_delay
            }
        }
    }
}

/// Contention window at retry stage `stage`: `2^stage · w0`, capped at
/// stage `m_prime`.
pub fn window_at_stage(stage: u32, protocol: &ProtocolConfig) -> Result<u32, ParamError> {
    if stage > protocol.m {
        return Err(ParamError::StageOutOfRange {
            stage,
            m: protocol.m,
        });
    }
    let exp = stage.min(protocol.m_prime);
    u32::try_from(u64::from(protocol.w0) << exp)
        .map_err(|_| ParamError::Invalid("contention window 2^m_prime·w0 overflows"))
}

//! Two-player match engine: HP/ATK/DEF roles, location-dependent damage,
//! the match lifecycle and replay from the event log.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::HitEvent;

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("invalid match config: {0}")]
    InvalidConfig(String),
    #[error("unknown location '{0}'")]
    UnknownLocation(String),
    #[error("replay diverged at seq {seq}: log says {recorded:?}, recomputed {recomputed:?}")]
    Divergence {
        seq: u64,
        recorded: Disposition,
        recomputed: Disposition,
    },
    #[error("event log line {line}: {message}")]
    Log { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleStats {
    pub hp: u32,
    pub atk: u32,
    pub def: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoleTable {
    pub roles: BTreeMap<String, RoleStats>,
}

impl Default for RoleTable {
    fn default() -> Self {
        let roles = [
            ("balanced", RoleStats { hp: 100, atk: 10, def: 5 }),
            ("tank", RoleStats { hp: 150, atk: 8, def: 8 }),
            ("striker", RoleStats { hp: 80, atk: 14, def: 3 }),
        ];
        Self {
            roles: roles.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

impl RoleTable {
    pub fn validate(&self) -> Result<(), GameError> {
        if self.roles.is_empty() {
            return Err(GameError::InvalidConfig("role table is empty".into()));
        }
        for (name, r) in &self.roles {
            if !(1..=999).contains(&r.hp) || !(1..=99).contains(&r.atk) || r.def > 99 {
                return Err(GameError::InvalidConfig(format!(
                    "role '{name}' outside hp 1..999, atk 1..99, def 0..99"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, role: &str) -> Option<RoleStats> {
        self.roles.get(role).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocationTable {
    pub multipliers: BTreeMap<String, f64>,
}

impl Default for LocationTable {
    fn default() -> Self {
        let m = [("hand", 0.5), ("forearm", 0.75), ("upper_arm", 1.0), ("torso", 1.5)];
        Self {
            multipliers: m.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

impl LocationTable {
    pub fn validate(&self) -> Result<(), GameError> {
        for (name, &m) in &self.multipliers {
            if !(m > 0.0 && m.is_finite()) {
                return Err(GameError::InvalidConfig(format!("multiplier for '{name}' must be positive")));
            }
        }
        Ok(())
    }

    pub fn multiplier(&self, location: &str) -> Result<f64, GameError> {
        self.multipliers
            .get(location)
            .copied()
            .ok_or_else(|| GameError::UnknownLocation(location.to_string()))
    }

    pub fn damage(&self, attacker: &PlayerState, defender: &PlayerState, location: &str) -> Result<u32, GameError> {
        Ok(damage(attacker.atk, self.multiplier(location)?, defender.def))
    }
}

/// `max(1, ⌈atk·multiplier − def⌉)`.
pub fn damage(atk: u32, multiplier: f64, def: u32) -> u32 {
    let raw = (f64::from(atk) * multiplier - f64::from(def) - 1e-9).ceil();
    if raw < 1.0 {
        1
    } else {
        raw as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerSetup {
    pub id: String,
    pub role: String,
    #[serde(default)]
    pub pmus: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub roles: RoleTable,
    pub locations: LocationTable,
    /// Per-defender dead time after an applied hit.
    pub refractory_ms: u64,
    pub players: Vec<PlayerSetup>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            roles: RoleTable::default(),
            locations: LocationTable::default(),
            refractory_ms: 500,
            players: ["p1", "p2"]
                .map(|id| PlayerSetup {
                    id: id.into(),
                    role: "balanced".into(),
                    pmus: Vec::new(),
                })
                .to_vec(),
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), GameError> {
        self.roles.validate()?;
        self.locations.validate()?;
        let bad = |m: String| Err(GameError::InvalidConfig(m));
        if self.players.len() != 2 {
            return bad(format!("a match has exactly 2 players, got {}", self.players.len()));
        }
        if self.players[0].id == self.players[1].id {
            return bad(format!("duplicate player id '{}'", self.players[0].id));
        }
        let mut seen = BTreeSet::new();
        for p in &self.players {
            if self.roles.get(&p.role).is_none() {
                return bad(format!("player '{}' has unknown role '{}'", p.id, p.role));
            }
            for pmu in &p.pmus {
                if !seen.insert(pmu) {
                    return bad(format!("pmu '{pmu}' bound twice"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerState {
    pub player_id: String,
    pub role: String,
    pub hp: u32,
    pub max_hp: u32,
    pub atk: u32,
    pub def: u32,
    pub bindings: BTreeSet<String>,
    /// Time of the last applied hit on this player.
    pub last_hit_ms: Option<u64>,
}

impl PlayerState {
    fn new(id: &str, role: &str, stats: RoleStats) -> Self {
        Self {
            player_id: id.to_string(),
            role: role.to_string(),
            hp: stats.hp,
            max_hp: stats.hp,
            atk: stats.atk,
            def: stats.def,
            bindings: BTreeSet::new(),
            last_hit_ms: None,
        }
    }

    pub fn defeated(&self) -> bool {
        self.hp == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Lobby,
    Running,
    Paused,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    Start,
    Pause,
    Resume,
    End,
    Reset,
    Bind { pmu_id: String, player_id: String },
    Unbind { pmu_id: String },
    Assign { player_id: String, role: String },
    /// Referee accepts a hit call as detected.
    Confirm { target_seq: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchEvent {
    Hit(HitEvent),
    /// Sword-on-sword contact from the sword's pressure sensor.
    SwordClash {
        source: String,
        #[serde(default)]
        intensity: Option<f64>,
    },
    /// Correct the location of an applied hit; `None` cancels the hit.
    Override {
        target_seq: u64,
        location: Option<String>,
    },
    Command(Command),
}

impl MatchEvent {
    pub fn is_hit(&self) -> bool {
        matches!(self, MatchEvent::Hit(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Disposition {
    Applied,
    Dropped { reason: String },
    Rejected { reason: String },
}

impl Disposition {
    fn rejected(reason: impl Into<String>) -> Self {
        Disposition::Rejected { reason: reason.into() }
    }

    pub fn is_applied(&self) -> bool {
        matches!(self, Disposition::Applied)
    }
}

/// What an applied hit or override did to a defender.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitEffect {
    pub attacker: String,
    pub defender: String,
    /// `None` once an override cancels the hit.
    pub location: Option<String>,
    pub damage: u32,
    pub hp_after: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub ts_ms: u64,
    pub event: MatchEvent,
    pub disposition: Disposition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<HitEffect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchState {
    pub config: MatchConfig,
    pub players: Vec<PlayerState>,
    pub phase: Phase,
    pub winner: Option<String>,
    pub log: Vec<LogEntry>,
}

/// The part of the state broadcast to observers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub phase: Phase,
    pub players: Vec<PlayerState>,
    pub winner: Option<String>,
    pub roles: RoleTable,
    pub locations: LocationTable,
    pub log_len: usize,
    pub last_seq: u64,
    /// Most recent log entries, oldest first.
    pub recent: Vec<LogEntry>,
}

pub const SNAPSHOT_RECENT: usize = 50;

impl MatchState {
    pub fn new(config: MatchConfig) -> Result<Self, GameError> {
        config.validate()?;
        let players = Self::initial_players(&config);
        Ok(Self {
            config,
            players,
            phase: Phase::Lobby,
            winner: None,
            log: Vec::new(),
        })
    }

    fn initial_players(config: &MatchConfig) -> Vec<PlayerState> {
        config
            .players
            .iter()
            .map(|p| {
                let mut s = PlayerState::new(&p.id, &p.role, config.roles.get(&p.role).expect("validated"));
                s.bindings = p.pmus.iter().cloned().collect();
                s
            })
            .collect()
    }

    pub fn player(&self, id: &str) -> Option<&PlayerState> {
        self.players.iter().find(|p| p.player_id == id)
    }

    fn index_of(&self, id: &str) -> Option<usize> {
        self.players.iter().position(|p| p.player_id == id)
    }

    pub fn bound_player(&self, pmu_id: &str) -> Option<&PlayerState> {
        self.players.iter().find(|p| p.bindings.contains(pmu_id))
    }

    pub fn last_seq(&self) -> u64 {
        self.log.last().map_or(0, |e| e.seq)
    }

    pub fn snapshot(&self) -> Snapshot {
        let start = self.log.len().saturating_sub(SNAPSHOT_RECENT);
        Snapshot {
            phase: self.phase,
            players: self.players.clone(),
            winner: self.winner.clone(),
            roles: self.config.roles.clone(),
            locations: self.config.locations.clone(),
            log_len: self.log.len(),
            last_seq: self.last_seq(),
            recent: self.log[start..].to_vec(),
        }
    }

    /// Apply one event at time `ts_ms` and append it to the log with its
    /// disposition. Rejected and dropped events leave the state unchanged.
    pub fn apply_event(&mut self, event: MatchEvent, ts_ms: u64) -> &LogEntry {
        let (disposition, effect) = match &event {
            MatchEvent::Hit(hit) => self.apply_hit(hit, ts_ms),
            MatchEvent::SwordClash { .. } => {
                if self.phase == Phase::Running {
                    (Disposition::Applied, None)
                } else {
                    (Disposition::rejected("match not running"), None)
                }
            }
            MatchEvent::Override { target_seq, location } => self.apply_override(*target_seq, location.as_deref()),
            MatchEvent::Command(cmd) => (self.apply_command(cmd), None),
        };
        let seq = self.last_seq() + 1;
        self.log.push(LogEntry {
            seq,
            ts_ms,
            event,
            disposition,
            effect,
        });
        self.log.last().expect("just pushed")
    }

    fn apply_hit(&mut self, hit: &HitEvent, ts_ms: u64) -> (Disposition, Option<HitEffect>) {
        if self.phase != Phase::Running {
            return (Disposition::rejected("match not running"), None);
        }
        let Some(d) = self.players.iter().position(|p| p.bindings.contains(&hit.pmu_id)) else {
            return (Disposition::rejected(format!("pmu '{}' is not bound", hit.pmu_id)), None);
        };
        let a = 1 - d;
        let dmg = match self.config.locations.damage(&self.players[a], &self.players[d], &hit.location) {
            Ok(v) => v,
            Err(e) => return (Disposition::rejected(e.to_string()), None),
        };
        let defender = &mut self.players[d];
        if let Some(last) = defender.last_hit_ms {
            if ts_ms.saturating_sub(last) < self.config.refractory_ms {
                return (
                    Disposition::Dropped {
                        reason: format!("within {} ms of previous hit", self.config.refractory_ms),
                    },
                    None,
                );
            }
        }
        defender.hp = defender.hp.saturating_sub(dmg);
        defender.last_hit_ms = Some(ts_ms);
        let effect = HitEffect {
            attacker: self.players[a].player_id.clone(),
            defender: self.players[d].player_id.clone(),
            location: Some(hit.location.clone()),
            damage: dmg,
            hp_after: self.players[d].hp,
        };
        self.check_finished(a, d);
        (Disposition::Applied, Some(effect))
    }

    fn check_finished(&mut self, attacker: usize, defender: usize) {
        if self.players[defender].defeated() {
            self.phase = Phase::Finished;
            self.winner = Some(self.players[attacker].player_id.clone());
        }
    }

    /// Current effect of the applied hit `target_seq`, after earlier overrides.
    fn current_effect(&self, target_seq: u64) -> Option<&HitEffect> {
        let hit = self
            .log
            .iter()
            .find(|e| e.seq == target_seq && e.event.is_hit() && e.disposition.is_applied())?;
        let latest = self.log.iter().rev().find(|e| {
            matches!(e.event, MatchEvent::Override { target_seq: t, .. } if t == target_seq) && e.disposition.is_applied()
        });
        latest.unwrap_or(hit).effect.as_ref()
    }

    fn apply_override(&mut self, target_seq: u64, location: Option<&str>) -> (Disposition, Option<HitEffect>) {
        if self.phase == Phase::Finished {
            return (Disposition::rejected("match finished"), None);
        }
        let Some(prev) = self.current_effect(target_seq).cloned() else {
            return (Disposition::rejected(format!("seq {target_seq} is not an applied hit")), None);
        };
        let (Some(a), Some(d)) = (self.index_of(&prev.attacker), self.index_of(&prev.defender)) else {
            return (Disposition::rejected("players changed since the hit"), None);
        };
        let new_damage = match location {
            None => 0,
            Some(loc) => match self.config.locations.damage(&self.players[a], &self.players[d], loc) {
                Ok(v) => v,
                Err(e) => return (Disposition::rejected(e.to_string()), None),
            },
        };
        let p = &mut self.players[d];
        let hp = (i64::from(p.hp) + i64::from(prev.damage) - i64::from(new_damage)).clamp(0, i64::from(p.max_hp));
        p.hp = hp as u32;
        let effect = HitEffect {
            location: location.map(str::to_string),
            damage: new_damage,
            hp_after: p.hp,
            ..prev
        };
        self.check_finished(a, d);
        (Disposition::Applied, Some(effect))
    }

    fn apply_command(&mut self, cmd: &Command) -> Disposition {
        use Phase::*;
        let wrong_phase = |phase: Phase| Disposition::rejected(format!("not allowed while {}", phase_name(phase)));
        match cmd {
            Command::Start => match self.phase {
                Lobby => {
                    self.phase = Running;
                    Disposition::Applied
                }
                p => wrong_phase(p),
            },
            Command::Pause => match self.phase {
                Running => {
                    self.phase = Paused;
                    Disposition::Applied
                }
                p => wrong_phase(p),
            },
            Command::Resume => match self.phase {
                Paused => {
                    self.phase = Running;
                    Disposition::Applied
                }
                p => wrong_phase(p),
            },
            Command::End => match self.phase {
                Running | Paused => {
                    self.phase = Finished;
                    self.winner = self.leader();
                    Disposition::Applied
                }
                p => wrong_phase(p),
            },
            Command::Reset => {
                self.phase = Lobby;
                self.winner = None;
                for p in &mut self.players {
                    p.hp = p.max_hp;
                    p.last_hit_ms = None;
                }
                Disposition::Applied
            }
            Command::Bind { pmu_id, player_id } => {
                if self.phase != Lobby {
                    return wrong_phase(self.phase);
                }
                if let Some(owner) = self.bound_player(pmu_id) {
                    return Disposition::rejected(format!("pmu '{pmu_id}' already bound to '{}'", owner.player_id));
                }
                let Some(i) = self.index_of(player_id) else {
                    return Disposition::rejected(format!("unknown player '{player_id}'"));
                };
                self.players[i].bindings.insert(pmu_id.clone());
                Disposition::Applied
            }
            Command::Unbind { pmu_id } => {
                if self.phase != Lobby {
                    return wrong_phase(self.phase);
                }
                for p in &mut self.players {
                    if p.bindings.remove(pmu_id) {
                        return Disposition::Applied;
                    }
                }
                Disposition::rejected(format!("pmu '{pmu_id}' is not bound"))
            }
            Command::Assign { player_id, role } => {
                if self.phase != Lobby {
                    return wrong_phase(self.phase);
                }
                let Some(stats) = self.config.roles.get(role) else {
                    return Disposition::rejected(format!("unknown role '{role}'"));
                };
                let Some(i) = self.index_of(player_id) else {
                    return Disposition::rejected(format!("unknown player '{player_id}'"));
                };
                let bindings = std::mem::take(&mut self.players[i].bindings);
                self.players[i] = PlayerState::new(player_id, role, stats);
                self.players[i].bindings = bindings;
                Disposition::Applied
            }
            Command::Confirm { target_seq } => {
                if self.current_effect(*target_seq).is_some() {
                    Disposition::Applied
                } else {
                    Disposition::rejected(format!("seq {target_seq} is not an applied hit"))
                }
            }
        }
    }

    /// Player with strictly more HP, if any.
    fn leader(&self) -> Option<String> {
        let (a, b) = (&self.players[0], &self.players[1]);
        match a.hp.cmp(&b.hp) {
            std::cmp::Ordering::Greater => Some(a.player_id.clone()),
            std::cmp::Ordering::Less => Some(b.player_id.clone()),
            std::cmp::Ordering::Equal => None,
        }
    }
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Lobby => "in lobby",
        Phase::Running => "running",
        Phase::Paused => "paused",
        Phase::Finished => "finished",
    }
}

/// Fold `log` over a fresh match. Every recomputed disposition must equal the
/// recorded one.
pub fn replay(config: MatchConfig, log: &[LogEntry]) -> Result<MatchState, GameError> {
    let mut state = MatchState::new(config)?;
    for (i, entry) in log.iter().enumerate() {
        let got = state.apply_event(entry.event.clone(), entry.ts_ms);
        if got.seq != entry.seq {
            return Err(GameError::Log {
                line: i + 1,
                message: format!("expected seq {}, found {}", got.seq, entry.seq),
            });
        }
        if got.disposition != entry.disposition || got.effect != entry.effect {
            return Err(GameError::Divergence {
                seq: entry.seq,
                recorded: entry.disposition.clone(),
                recomputed: got.disposition.clone(),
            });
        }
    }
    Ok(state)
}

pub fn log_to_jsonl(log: &[LogEntry]) -> String {
    log.iter()
        .map(|e| serde_json::to_string(e).expect("log entry serializes") + "\n")
        .collect()
}

/// Parse a JSON Lines event log; blank lines are skipped and sequence numbers
/// must increase.
pub fn log_from_jsonl(text: &str) -> Result<Vec<LogEntry>, GameError> {
    let mut out: Vec<LogEntry> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry = serde_json::from_str(line).map_err(|e| GameError::Log {
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(prev) = out.last() {
            if entry.seq <= prev.seq {
                return Err(GameError::Log {
                    line: i + 1,
                    message: format!("seq {} does not follow {}", entry.seq, prev.seq),
                });
            }
        }
        out.push(entry);
    }
    Ok(out)
}

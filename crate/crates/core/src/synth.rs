//! Synthetic households with planted routines.
//!
//! A day is a Markov chain over routines. Each routine episode walks through a
//! hallway and then fires sensors in the routine's rooms, re-firing the current
//! sensor with a routine-specific dwell probability and occasionally moving to
//! another of its rooms. Every event of an episode carries the routine's name
//! as its truth label.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{is_temperature_sensor, SensorEvent};
use crate::error::{Error, Result};
use crate::layout::{HouseLayout, Polygon, LAYOUT_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub name: String,
    /// `[x0, y0, x1, y1]` in normalized plan coordinates.
    pub rect: [f64; 4],
    pub sensors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutineSpec {
    pub label: String,
    /// Rooms the routine moves between; the episode starts in a random one.
    pub rooms: Vec<String>,
    /// Inclusive range of sensor activations per episode.
    pub activations: [usize; 2],
    /// Probability that the next activation re-fires the current sensor.
    pub dwell: f64,
    /// Probability that the next activation happens in another of the routine's rooms.
    #[serde(default)]
    pub switch: f64,
    /// Relative firing weight per sensor; unlisted non-thermometer sensors weigh 1.
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dataset: String,
    pub start_date: NaiveDate,
    pub days: usize,
    pub events_per_day: usize,
    pub rooms: Vec<RoomSpec>,
    /// Room crossed between consecutive episodes.
    pub hallway: String,
    pub routines: Vec<RoutineSpec>,
    /// Row-stochastic routine-to-routine transition weights.
    pub schedule: Vec<Vec<f64>>,
    /// Chance that an activation in a room with a thermometer also logs a reading.
    pub temperature_rate: f64,
    pub seed: u64,
}

fn room(name: &str, rect: [f64; 4], sensors: &[&str]) -> RoomSpec {
    RoomSpec {
        name: name.into(),
        rect,
        sensors: sensors.iter().map(|s| s.to_string()).collect(),
    }
}

fn routine(label: &str, rooms: &[&str], activations: [usize; 2], dwell: f64, switch: f64, weights: &[(&str, f64)]) -> RoutineSpec {
    RoutineSpec {
        label: label.into(),
        rooms: rooms.iter().map(|r| r.to_string()).collect(),
        activations,
        dwell,
        switch,
        weights: weights.iter().map(|(s, w)| (s.to_string(), *w)).collect(),
    }
}

impl Default for SynthConfig {
    /// Two static and two roaming routines in a nine-room house, 5,000 events over 10 days.
    fn default() -> Self {
        Self {
            dataset: "synthetic".into(),
            start_date: NaiveDate::from_ymd_opt(2024, 3, 4).unwrap(),
            days: 10,
            events_per_day: 500,
            rooms: vec![
                room("Kitchen", [0.0, 0.0, 0.3, 0.45], &["M001", "M002", "M003", "D001", "T001"]),
                room("Dining Room", [0.3, 0.0, 0.5, 0.45], &["M004", "M005", "M006"]),
                room("Living Room", [0.5, 0.0, 0.75, 0.45], &["M007", "M008", "M009"]),
                room("TV Room", [0.75, 0.0, 1.0, 0.45], &["M010", "M011"]),
                room("Hallway", [0.0, 0.45, 1.0, 0.55], &["M012", "M013", "M014"]),
                room("Bedroom", [0.0, 0.55, 0.3, 1.0], &["M015", "M016", "M017", "T002"]),
                room("Bathroom", [0.3, 0.55, 0.5, 1.0], &["M018", "M019", "D002"]),
                room("Office", [0.5, 0.55, 0.8, 1.0], &["M020", "M021", "M022"]),
                room("Entrance", [0.8, 0.55, 1.0, 1.0], &["M023", "D003"]),
            ],
            hallway: "Hallway".into(),
            routines: vec![
                routine("Cook", &["Kitchen", "Dining Room"], [20, 60], 0.1, 0.2, &[]),
                routine("Relax", &["Living Room"], [20, 60], 0.9, 0.0, &[("M008", 10.0)]),
                routine("Sleep", &["Bedroom"], [20, 60], 0.9, 0.0, &[("M016", 10.0)]),
                routine("Work", &["Office", "Entrance", "Bathroom"], [20, 60], 0.1, 0.2, &[]),
            ],
            schedule: vec![
                vec![0.0, 1.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0, 1.0],
                vec![1.0, 1.0, 0.0, 1.0],
                vec![1.0, 1.0, 1.0, 0.0],
            ],
            temperature_rate: 0.05,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.routines.len();
        if n == 0 || self.days == 0 || self.events_per_day == 0 {
            return Err(Error::invalid("synthetic household needs routines, days and events"));
        }
        if self.schedule.len() != n || self.schedule.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("schedule must be a routines × routines matrix"));
        }
        if self.schedule.iter().any(|r| r.iter().all(|&w| w <= 0.0)) {
            return Err(Error::invalid("every schedule row needs a positive weight"));
        }
        self.room(&self.hallway)?;
        for r in &self.routines {
            if r.rooms.is_empty() {
                return Err(Error::invalid(format!("{} has no rooms", r.label)));
            }
            for name in &r.rooms {
                self.room(name)?;
            }
            if r.activations[0] == 0 || r.activations[0] > r.activations[1] {
                return Err(Error::invalid(format!("bad activation range for {}", r.label)));
            }
            if !(0.0..1.0).contains(&r.dwell) || !(0.0..=1.0).contains(&r.switch) {
                return Err(Error::invalid(format!("dwell and switch for {} must be probabilities", r.label)));
            }
        }
        Ok(())
    }

    fn room(&self, name: &str) -> Result<&RoomSpec> {
        self.rooms
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::invalid(format!("unknown room {name}")))
    }
}

#[derive(Debug, Clone)]
pub struct SynthHousehold {
    pub events: Vec<SensorEvent>,
    pub layout: HouseLayout,
}

struct Emitter<'a> {
    rng: ChaCha8Rng,
    clock: NaiveDateTime,
    events: Vec<SensorEvent>,
    temperature: BTreeMap<&'a str, f64>,
    temperature_rate: f64,
}

impl<'a> Emitter<'a> {
    fn tick(&mut self, lo_ms: i64, hi_ms: i64) {
        self.clock += Duration::milliseconds(self.rng.random_range(lo_ms..=hi_ms));
    }

    fn push(&mut self, sensor: &str, value: String, label: &str) {
        self.events
            .push(SensorEvent::new(self.clock, sensor, value).with_label(label));
    }

    fn activate(&mut self, sensor: &str, room: &'a RoomSpec, label: &str) {
        let (on, off) = if sensor.starts_with('D') {
            ("OPEN", "CLOSE")
        } else {
            ("ON", "OFF")
        };
        self.tick(1_000, 20_000);
        self.push(sensor, on.into(), label);
        self.tick(500, 8_000);
        self.push(sensor, off.into(), label);
        let thermometers: Vec<&'a str> = room
            .sensors
            .iter()
            .map(String::as_str)
            .filter(|s| is_temperature_sensor(s))
            .collect();
        for t in thermometers {
            if self.rng.random_bool(self.temperature_rate) {
                let drift = self.rng.random_range(-0.5..=0.5);
                let reading = self.temperature.entry(t).or_insert(21.0);
                *reading = (*reading + drift).clamp(17.0, 26.0);
                let value = format!("{:.1}", *reading);
                self.tick(100, 2_000);
                self.push(t, value, label);
            }
        }
    }
}

fn motion_sensors(room: &RoomSpec) -> Vec<&str> {
    room.sensors
        .iter()
        .map(String::as_str)
        .filter(|s| !is_temperature_sensor(s))
        .collect()
}

/// Generates the household's event stream and floor plan.
pub fn generate(config: &SynthConfig) -> Result<SynthHousehold> {
    config.validate()?;
    let mut em = Emitter {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        clock: NaiveDateTime::new(config.start_date, NaiveTime::MIN),
        events: Vec::new(),
        temperature: BTreeMap::new(),
        temperature_rate: config.temperature_rate,
    };
    let hallway = config.room(&config.hallway)?;
    let hall_sensors = motion_sensors(hallway);
    let transitions: Vec<WeightedIndex<f64>> = config
        .schedule
        .iter()
        .map(|row| WeightedIndex::new(row).map_err(|e| Error::invalid(format!("schedule: {e}"))))
        .collect::<Result<_>>()?;

    let mut current = em.rng.random_range(0..config.routines.len());
    for day in 0..config.days {
        let day_start = NaiveDateTime::new(
            config.start_date + Duration::days(day as i64),
            NaiveTime::from_hms_opt(6, 0, 0).unwrap(),
        );
        em.clock = day_start + Duration::seconds(em.rng.random_range(0..1800));
        let target = em.events.len() + config.events_per_day;
        while em.events.len() < target {
            let spec = &config.routines[current];
            let rooms: Vec<&RoomSpec> = spec.rooms.iter().map(|r| config.room(r)).collect::<Result<_>>()?;
            let pickers: Vec<WeightedIndex<f64>> = rooms
                .iter()
                .map(|room| {
                    let weights = room.sensors.iter().map(|s| match spec.weights.get(s) {
                        Some(&w) => w,
                        None if is_temperature_sensor(s) => 0.0,
                        None => 1.0,
                    });
                    WeightedIndex::new(weights)
                        .map_err(|e| Error::invalid(format!("weights for {} in {}: {e}", spec.label, room.name)))
                })
                .collect::<Result<_>>()?;

            for _ in 0..em.rng.random_range(1..=2usize) {
                let s = hall_sensors[em.rng.random_range(0..hall_sensors.len())];
                em.activate(s, hallway, &spec.label);
            }
            let mut r = em.rng.random_range(0..rooms.len());
            let mut sensor = rooms[r].sensors[pickers[r].sample(&mut em.rng)].as_str();
            for _ in 0..em.rng.random_range(spec.activations[0]..=spec.activations[1]) {
                em.activate(sensor, rooms[r], &spec.label);
                if rooms.len() > 1 && em.rng.random_bool(spec.switch) {
                    r = (r + em.rng.random_range(1..rooms.len())) % rooms.len();
                    sensor = rooms[r].sensors[pickers[r].sample(&mut em.rng)].as_str();
                } else if !em.rng.random_bool(spec.dwell) {
                    sensor = rooms[r].sensors[pickers[r].sample(&mut em.rng)].as_str();
                }
            }
            em.tick(60_000, 600_000);
            current = transitions[current].sample(&mut em.rng);
        }
        em.events.truncate(target);
    }

    Ok(SynthHousehold {
        layout: layout_for(config),
        events: em.events,
    })
}

/// Rectangular rooms with sensors spread along each room's diagonal band.
pub fn layout_for(config: &SynthConfig) -> HouseLayout {
    let mut sensors = BTreeMap::new();
    let rooms = config
        .rooms
        .iter()
        .map(|r| {
            let [x0, y0, x1, y1] = r.rect;
            let n = r.sensors.len() as f64;
            for (i, s) in r.sensors.iter().enumerate() {
                let t = (i as f64 + 0.5) / n;
                let y = if i % 2 == 0 { 0.35 } else { 0.65 };
                sensors.insert(s.clone(), [x0 + (x1 - x0) * t, y0 + (y1 - y0) * y]);
            }
            Polygon {
                name: r.name.clone(),
                points: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
            }
        })
        .collect();
    HouseLayout {
        v: LAYOUT_VERSION,
        dataset: config.dataset.clone(),
        rooms,
        sensors,
        furniture: Vec::new(),
    }
}

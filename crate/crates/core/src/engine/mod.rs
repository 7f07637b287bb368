//! Fixed-step episode engine.
//!
//! Per tick `k` (`t = k·dt`): drain operator inputs, apply injections,
//! perceive, plan, monitor conflicts, step the supervisor, select the
//! command by mode, record the pre-step state, integrate dynamics and
//! traffic, then check collisions and the destination.

mod log;
mod script;

pub use log::{
    line_to_json, summarize, EndReason, EpisodeLog, EventRecord, Header, LogError, LogEvent,
    LogLine, Summary, TickRecord, LOG_VERSION,
};
pub use script::{OperatorScript, ScriptEntry, ScriptWhen, ScriptedOperator};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::conflicts::{apply_injections, conflict_monitor, InjectionSchedule, WorldConditions};
use crate::control::{
    ControlError, Controller, ControllerId, ControllerRegistry, PredictedPath, WorldView,
};
use crate::dynamics::{
    check_collision, spawn_traffic, step_bicycle, step_traffic, ControlCommand, Footprint,
    ObjectId, TrafficActor, VehicleState, DT,
};
use crate::geom::Vec2;
use crate::perception::{
    compute_confidence_raw, tick_perception, PerceptionConfig, PerceptionFrame,
};
use crate::roadnet::{LaneId, LaneRef, RoadNetwork, Side};
use crate::scenario::{
    BuiltinMaps, MapResolver, ObstacleDecl, ScenarioError, ScenarioSpec, StartSpec,
};
use crate::supervisor::{
    mrm_command, supervisor_tick, Mode, OperatorInput, SupervisorEvent, SupervisorState,
};

/// Ten minutes of simulated time.
pub const DEFAULT_MAX_TICKS: u64 = 12_000;
pub const DESTINATION_RADIUS: f64 = 5.0;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("invalid episode configuration: {0}")]
    Config(String),
}

/// Independent random streams derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Perception = 1,
    Traffic = 2,
    Spawn = 3,
}

pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub scenario: ScenarioSpec,
    pub controller: ControllerId,
    pub seed: u64,
    pub max_ticks: u64,
    /// Draw the start uniformly from the start and alternate spawn points.
    pub randomize_spawn: bool,
    pub perception: PerceptionConfig,
}

impl EpisodeConfig {
    pub fn new(scenario: ScenarioSpec) -> Self {
        Self {
            scenario,
            controller: ControllerId::default(),
            seed: 0,
            max_ticks: DEFAULT_MAX_TICKS,
            randomize_spawn: false,
            perception: PerceptionConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_ticks(mut self, max_ticks: u64) -> Self {
        self.max_ticks = max_ticks;
        self
    }
}

/// What one tick produced, for live consumers.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub record: TickRecord,
    pub events: Vec<EventRecord>,
    pub path: PredictedPath,
    pub budget: f64,
    pub tor_elapsed: Option<f64>,
    pub done: Option<EndReason>,
}

pub struct Episode {
    net: RoadNetwork,
    spec: ScenarioSpec,
    perception_cfg: PerceptionConfig,
    max_ticks: u64,
    controller: Box<dyn Controller>,
    world: WorldConditions,
    schedule: InjectionSchedule,
    ego: VehicleState,
    actors: Vec<TrafficActor>,
    sup: SupervisorState,
    perception: Option<PerceptionFrame>,
    /// Last trusted offset measurement and the true offset at that tick.
    last_good: (f64, f64),
    rng_perception: ChaCha8Rng,
    odometer: f64,
    k: u64,
    tor_times: Vec<f64>,
    done: Option<EndReason>,
    log: EpisodeLog,
}

impl Episode {
    /// Resolves the map, validates the scenario and the controller, and
    /// places the ego at its start pose at `v_ref`.
    pub fn new(
        config: EpisodeConfig,
        resolver: &dyn MapResolver,
        registry: &ControllerRegistry,
    ) -> Result<Self, EngineError> {
        let net = resolver
            .resolve(&config.scenario.map)
            .map_err(ScenarioError::from)?;
        Self::with_network(config, net, registry)
    }

    pub fn with_network(
        config: EpisodeConfig,
        net: RoadNetwork,
        registry: &ControllerRegistry,
    ) -> Result<Self, EngineError> {
        let spec = config.scenario;
        spec.validate(&net)?;
        if config.max_ticks == 0 {
            return Err(EngineError::Config("max_ticks must be positive".into()));
        }
        let controller = registry.create(&config.controller)?;

        let mut spawn_rng = substream(config.seed, Stream::Spawn);
        let start = if config.randomize_spawn && !spec.alternates.is_empty() {
            let i = spawn_rng.gen_range(0..=spec.alternates.len());
            if i == 0 {
                spec.start.clone()
            } else {
                StartSpec::Spawn(spec.alternates[i - 1].clone())
            }
        } else {
            spec.start.clone()
        };
        let ego = initial_state(&net, &start, spec.v_ref);
        let actors = spawn_traffic(
            &spec.traffic,
            &net,
            &mut substream(config.seed, Stream::Traffic),
        );
        let world = WorldConditions::new(
            spec.sensor_noise_sigma,
            spec.weather_id,
            spec.static_obstacles.clone(),
        );
        let schedule = InjectionSchedule::new(spec.events().to_vec());
        let header = Header {
            version: LOG_VERSION,
            seed: config.seed,
            scenario: spec.name.clone(),
            controller: config.controller.0.clone(),
            dt: DT,
            max_ticks: config.max_ticks,
            spec: spec.clone(),
        };
        Ok(Self {
            net,
            sup: SupervisorState::new(&spec.supervisor),
            spec,
            perception_cfg: config.perception,
            max_ticks: config.max_ticks,
            controller,
            world,
            schedule,
            ego,
            actors,
            perception: None,
            last_good: (0.0, 0.0),
            rng_perception: substream(config.seed, Stream::Perception),
            odometer: 0.0,
            k: 0,
            tor_times: Vec::new(),
            done: None,
            log: EpisodeLog::new(header),
        })
    }

    pub fn network(&self) -> &RoadNetwork {
        &self.net
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn ego(&self) -> &VehicleState {
        &self.ego
    }

    pub fn actors(&self) -> &[TrafficActor] {
        &self.actors
    }

    pub fn world(&self) -> &WorldConditions {
        &self.world
    }

    pub fn supervisor(&self) -> &SupervisorState {
        &self.sup
    }

    pub fn tick(&self) -> u64 {
        self.k
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * DT
    }

    pub fn tor_times(&self) -> &[f64] {
        &self.tor_times
    }

    pub fn done(&self) -> Option<EndReason> {
        self.done
    }

    pub fn log(&self) -> &EpisodeLog {
        &self.log
    }

    /// Route polyline from the ego towards the destination.
    pub fn route(&self) -> Vec<Vec2> {
        let dest = self.spec.destination.map(|p| Vec2::new(p.x, p.y));
        let r = self.ego.lane_ref;
        self.net.route(r.lane, r.s, dest, 3000.0, 5.0)
    }

    /// Obstacle and traffic footprints at the current state.
    pub fn footprints(&self) -> Vec<Footprint> {
        let mut out: Vec<Footprint> = self
            .world
            .obstacles
            .iter()
            .enumerate()
            .filter_map(|(i, o)| obstacle_footprint(&self.net, o, i))
            .collect();
        out.extend(self.actors.iter().map(|a| a.footprint(&self.net)));
        out
    }

    /// Advances one tick. Returns `None` once the episode has ended.
    pub fn step(&mut self, inputs: &[OperatorInput]) -> Option<TickOutput> {
        if self.done.is_some() {
            return None;
        }
        let k = self.k;
        let t = k as f64 * DT;
        let mut events = Vec::new();
        let mut emit = |event: LogEvent| events.push(EventRecord { event, k, t });

        for ev in apply_injections(&mut self.world, &mut self.schedule, t, self.odometer) {
            emit(LogEvent::Injection { action: ev.action });
        }

        let cfg = self.perception_cfg;
        let weather =
            crate::scenario::weather_preset(self.world.weather_id).unwrap_or(self.spec.weather());
        let failed = self.world.sensor_failed;
        let raw = compute_confidence_raw(
            &self.net,
            &self.ego,
            weather,
            self.world.sigma,
            failed,
            &cfg,
        );
        let frame = tick_perception(
            self.perception.as_ref(),
            raw,
            self.ego.lane_ref.d,
            self.world.sigma,
            failed,
            t,
            &cfg,
            &mut self.rng_perception,
        );
        if !frame.sensor_failed {
            self.last_good = (frame.lateral_offset_meas, self.ego.lane_ref.d);
        }
        self.perception = Some(frame);
        // without a sensor, the offset estimate is dead-reckoned from the last good one
        let offset_estimate = self.last_good.0 + (self.ego.lane_ref.d - self.last_good.1);
        let steering_frame = PerceptionFrame {
            lateral_offset_meas: offset_estimate,
            ..frame
        };

        let view = WorldView {
            network: &self.net,
            ego: &self.ego,
            obstacles: &self.world.obstacles,
            actors: &self.actors,
            v_ref: self.spec.v_ref,
            t,
        };
        let plan = self.controller.plan_tick(&view, &steering_frame);
        let sup_cfg = self.spec.supervisor;
        let monitor = conflict_monitor(
            &self.world,
            &frame,
            &plan.flags,
            sup_cfg.thresholds.critical,
        );
        let (sup, sup_events) =
            supervisor_tick(&self.sup, &sup_cfg, &frame, monitor.as_ref(), inputs, t);
        self.sup = sup;
        for e in sup_events {
            if let SupervisorEvent::TorIssued { .. } = e {
                self.tor_times.push(t);
            }
            emit(supervisor_event(e));
        }

        let command = match self.sup.mode {
            Mode::Auto | Mode::Warning | Mode::TorPending => plan.command,
            Mode::Manual => self.sup.manual_command,
            Mode::Mrm => mrm_command(&self.ego, &self.net, offset_estimate),
        };
        let stop_now = self.sup.mode == Mode::Mrm && self.ego.v <= 0.0;
        let command = if stop_now {
            ControlCommand::new(0.0, command.steer)
        } else {
            command
        };

        let mut record = self.record(k, t, &frame, command);
        let mut done = None;
        if stop_now {
            done = Some(EndReason::MrmStop);
        } else {
            let prev = self.ego;
            let next = step_bicycle(&prev, command, DT, &self.net);
            self.actors = step_traffic(&self.actors, &self.net, t, DT);
            self.odometer += prev.position().distance(next.position());
            if let Some(ev) = lane_change(&self.net, &prev.lane_ref, &next.lane_ref, self.sup.mode)
            {
                emit(ev);
            }
            self.ego = next;
            if let Some(hit) = check_collision(&self.ego.footprint(), &self.footprints()) {
                record.collision = true;
                emit(LogEvent::Collision {
                    with: hit.with.to_string(),
                });
                done = Some(EndReason::Collision);
            } else if let Some(dest) = self.spec.destination {
                if self.ego.position().distance(Vec2::new(dest.x, dest.y)) <= DESTINATION_RADIUS {
                    done = Some(EndReason::Destination);
                }
            }
            if done.is_none() && k + 1 >= self.max_ticks {
                done = Some(EndReason::MaxTicks);
            }
        }
        if let Some(reason) = done {
            emit(LogEvent::EpisodeEnd { reason });
        }

        self.log.push(LogLine::Tick(record.clone()));
        for e in &events {
            self.log.push(LogLine::Event(e.clone()));
        }
        self.k += 1;
        self.done = done;
        Some(TickOutput {
            record,
            events,
            path: plan.path,
            budget: self.sup.budget,
            tor_elapsed: self.sup.tor_elapsed(t),
            done,
        })
    }

    fn record(&self, k: u64, t: f64, frame: &PerceptionFrame, cmd: ControlCommand) -> TickRecord {
        let e = &self.ego;
        TickRecord {
            k,
            t,
            ego: [e.x, e.y, e.theta, e.v],
            lane: e.lane_ref.lane,
            s: e.lane_ref.s,
            d: e.lane_ref.d,
            odo: self.odometer,
            conf: frame.confidence,
            conf_raw: frame.confidence_raw,
            offset_meas: frame.lateral_offset_meas,
            sensor_failed: frame.sensor_failed,
            mode: self.sup.mode,
            conflict: self.sup.active_conflict,
            cmd: [cmd.accel, cmd.steer],
            collision: false,
        }
    }

    /// Steps to the end with a scripted operator and closes the log.
    pub fn run(mut self, script: &OperatorScript) -> EpisodeLog {
        let mut operator = ScriptedOperator::new(script.clone());
        while self.done.is_none() {
            let inputs = operator.inputs_at(self.time(), &self.tor_times);
            self.step(&inputs);
        }
        self.finish()
    }

    /// Closes the log with its summary line.
    pub fn finish(mut self) -> EpisodeLog {
        let summary = summarize(&self.log);
        self.log.push(LogLine::Summary(summary));
        self.log
    }
}

fn supervisor_event(e: SupervisorEvent) -> LogEvent {
    match e {
        SupervisorEvent::TorIssued { conflict, budget } => LogEvent::TorIssued { conflict, budget },
        SupervisorEvent::Takeover {
            conflict,
            reaction_time,
        } => LogEvent::Takeover {
            conflict,
            reaction_time,
        },
        SupervisorEvent::MissedTor { conflict } => LogEvent::MissedTor { conflict },
        SupervisorEvent::WarningOn { confidence } => LogEvent::WarningOn { confidence },
        SupervisorEvent::WarningOff { confidence } => LogEvent::WarningOff { confidence },
        SupervisorEvent::ModeChange { from, to } => LogEvent::ModeChange { from, to },
        SupervisorEvent::InputIgnored {
            input,
            mode,
            reason,
        } => LogEvent::InputIgnored {
            input: input.to_string(),
            mode,
            reason,
        },
    }
}

fn lane_change(net: &RoadNetwork, from: &LaneRef, to: &LaneRef, mode: Mode) -> Option<LogEvent> {
    if from.lane == to.lane {
        return None;
    }
    let side = if net.neighbor(from.lane, Side::Left) == Some(to.lane) {
        Side::Left
    } else if net.neighbor(from.lane, Side::Right) == Some(to.lane) {
        Side::Right
    } else {
        return None;
    };
    let crossing = net.crossing_kind(from.lane, side, from.s)?;
    Some(LogEvent::LaneChange {
        from: from.lane,
        to: to.lane,
        crossing,
        mode,
    })
}

pub fn initial_state(net: &RoadNetwork, start: &StartSpec, v: f64) -> VehicleState {
    let (p, theta, hint) = match start {
        StartSpec::Spawn(name) => {
            let sp = net.spawn(name).expect("validated spawn point");
            (sp.position(), sp.theta, sp.lane)
        }
        StartSpec::Pose(pose) => (Vec2::new(pose.x, pose.y), pose.theta, LaneId(u32::MAX)),
    };
    VehicleState {
        x: p.x,
        y: p.y,
        theta,
        v,
        lane_ref: net.localize(hint, p),
    }
}

pub fn obstacle_footprint(net: &RoadNetwork, o: &ObstacleDecl, index: usize) -> Option<Footprint> {
    let lane = net.lane(o.lane)?;
    let c = lane.offset_point(o.s, o.lateral_offset);
    Some(Footprint::new(
        ObjectId::obstacle(index as u32),
        c,
        lane.heading_at(o.s) + o.yaw,
        o.length,
        o.width,
    ))
}

/// Runs an episode to completion on built-in maps with the default
/// controller registry.
pub fn run_episode(
    config: EpisodeConfig,
    script: &OperatorScript,
) -> Result<EpisodeLog, EngineError> {
    run_episode_with(
        config,
        script,
        &BuiltinMaps,
        &ControllerRegistry::with_builtins(),
    )
}

pub fn run_episode_with(
    config: EpisodeConfig,
    script: &OperatorScript,
    resolver: &dyn MapResolver,
    registry: &ControllerRegistry,
) -> Result<EpisodeLog, EngineError> {
    Ok(Episode::new(config, resolver, registry)?.run(script))
}

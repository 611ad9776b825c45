use std::any::Any;
use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::blocks::{Cycle, Gate, Ix, Qx, Rs};
use super::image::{IoError, ProcessImage};
use super::network::{FbNetwork, NetworkError, ResolvedNetwork};
use super::queue::{EventOccurrence, EventPin, EventQueue, Origin, OriginKind, QueueFull};
use super::timer::TimerService;
use super::types::{BehaviorKind, FbTypeDecl};
use crate::commstack::StackOptions;
use crate::value::Value;

/// The executable part of an FB instance. Runs only on the scheduler.
pub trait Behavior: Send {
    /// Event input `event` fired; connected data inputs are already sampled.
    fn on_event(&mut self, event: usize, ctx: &mut FbContext<'_>);

    /// A service raised event output `event` (timer tick or transport
    /// indication). The default just emits it.
    fn on_output(&mut self, event: usize, origin: Origin, ctx: &mut FbContext<'_>) {
        let _ = origin;
        ctx.emit(event);
    }

    /// Releases external resources when the runtime is torn down.
    fn shutdown(&mut self) {}
}

/// Settings shared by the service blocks of a resource.
#[derive(Clone)]
pub struct RuntimeOptions {
    pub stack: StackOptions,
    /// How long a client waits for its response.
    pub client_timeout: Duration,
    /// How long a server waits for the application's RSP.
    pub response_window: Duration,
}

impl Default for RuntimeOptions {
    fn default() -> Self {
        RuntimeOptions {
            stack: StackOptions::default(),
            client_timeout: Duration::from_millis(1000),
            response_window: Duration::from_millis(5000),
        }
    }
}

/// Error counters of one resource.
#[derive(Debug, Default)]
pub struct ResourceStats {
    pub decode_errors: AtomicU64,
    /// RSP with no pending request.
    pub orphan_responses: AtomicU64,
    /// REQ while a client exchange was still in flight.
    pub ignored_requests: AtomicU64,
    pub send_failures: AtomicU64,
}

impl ResourceStats {
    pub fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StatsSnapshot {
    pub drops: u64,
    pub decode_errors: u64,
    pub orphan_responses: u64,
    pub ignored_requests: u64,
    pub send_failures: u64,
    pub tx_bytes: u64,
    pub rx_bytes: u64,
    pub tx_msgs: u64,
    pub rx_msgs: u64,
}

impl fmt::Display for StatsSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "drops={} decode_errors={} orphan_responses={} ignored_requests={} send_failures={} tx_bytes={} rx_bytes={} tx_msgs={} rx_msgs={}",
            self.drops,
            self.decode_errors,
            self.orphan_responses,
            self.ignored_requests,
            self.send_failures,
            self.tx_bytes,
            self.rx_bytes,
            self.tx_msgs,
            self.rx_msgs
        )
    }
}

#[derive(Clone)]
pub struct ResourceServices {
    pub image: ProcessImage,
    pub stats: Arc<ResourceStats>,
    pub options: RuntimeOptions,
}

/// Posts service-raised occurrences for one FB from any thread.
#[derive(Clone)]
pub struct Poster {
    queue: Arc<EventQueue>,
    fb: usize,
}

impl Poster {
    pub fn post_output(&self, event_output: usize, payload: Box<dyn Any + Send>) -> Result<(), QueueFull> {
        self.queue.post(EventOccurrence::external(self.fb, event_output, payload))
    }
}

/// What a behavior sees while it runs.
pub struct FbContext<'a> {
    fb: usize,
    name: &'a str,
    decl: &'a FbTypeDecl,
    inputs: &'a [Value],
    outputs: &'a mut [Value],
    emitted: Vec<usize>,
    timers: &'a mut TimerService,
    services: &'a ResourceServices,
    queue: &'a Arc<EventQueue>,
    now: Instant,
}

impl<'a> FbContext<'a> {
    pub fn name(&self) -> &str {
        self.name
    }

    pub fn decl(&self) -> &FbTypeDecl {
        self.decl
    }

    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    pub fn input(&self, index: usize) -> &Value {
        &self.inputs[index]
    }

    pub fn input_bool(&self, index: usize) -> bool {
        self.inputs[index].as_bool().unwrap_or(false)
    }

    pub fn output(&self, index: usize) -> &Value {
        &self.outputs[index]
    }

    /// Writes an output; a value of the wrong kind is refused.
    pub fn set_output(&mut self, index: usize, value: Value) -> bool {
        if value.kind() != self.decl.data_outputs[index].1 {
            return false;
        }
        self.outputs[index] = value;
        true
    }

    pub fn emit(&mut self, event_output: usize) {
        self.emitted.push(event_output);
    }

    pub fn start_timer(&mut self, period: Duration) {
        self.timers.start(self.fb, period, self.now);
    }

    pub fn stop_timer(&mut self) {
        self.timers.cancel(self.fb);
    }

    pub fn timer_running(&self) -> bool {
        self.timers.is_running(self.fb)
    }

    pub fn image(&self) -> &ProcessImage {
        &self.services.image
    }

    pub fn services(&self) -> &ResourceServices {
        self.services
    }

    pub fn poster(&self) -> Poster {
        Poster { queue: Arc::clone(self.queue), fb: self.fb }
    }
}

/// The result of one scheduler step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepReport {
    Idle,
    Fired(FiredStep),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiredStep {
    pub fb: String,
    pub event: String,
    pub origin: OriginKind,
    /// Event outputs in emission order.
    pub emitted: Vec<String>,
    /// Pins whose value changed, inputs by sampling and outputs by the behavior.
    pub changed: Vec<(String, Value)>,
    /// Occurrences appended to the queue along event connections.
    pub enqueued: usize,
}

impl StepReport {
    pub fn is_idle(&self) -> bool {
        matches!(self, StepReport::Idle)
    }

    pub fn fired(&self) -> Option<&FiredStep> {
        match self {
            StepReport::Fired(f) => Some(f),
            StepReport::Idle => None,
        }
    }
}

struct Instance {
    name: String,
    decl: FbTypeDecl,
    inputs: Vec<Value>,
    outputs: Vec<Value>,
    behavior: Box<dyn Behavior>,
}

fn make_behavior(decl: &FbTypeDecl) -> Box<dyn Behavior> {
    match decl.behavior {
        BehaviorKind::Rs => Box::<Rs>::default(),
        BehaviorKind::Gate(kind) => Box::new(Gate(kind)),
        BehaviorKind::ECycle => Box::<Cycle>::default(),
        BehaviorKind::Ix => Box::<Ix>::default(),
        BehaviorKind::Qx => Box::<Qx>::default(),
        BehaviorKind::Sifb(spec) => Box::new(crate::sifb::SifbBlock::new(spec)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuntimeError {
    #[error("no FB {0:?} on this resource")]
    UnknownFb(String),
    #[error("{0} has no such pin")]
    UnknownPin(String),
    #[error("value of kind {got} for {pin} input")]
    Kind { pin: String, got: crate::value::ValueKind },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    QueueFull(#[from] QueueFull),
}

/// The FBs of one device, their connections and a scheduler.
pub struct ResourceRuntime {
    device: String,
    instances: Vec<Instance>,
    index: HashMap<String, usize>,
    /// [fb][event output] -> sinks (fb, event input)
    routes: Vec<Vec<Vec<(usize, usize)>>>,
    /// [fb][data input] -> source (fb, data output)
    sources: Vec<Vec<Option<(usize, usize)>>>,
    queue: Arc<EventQueue>,
    timers: TimerService,
    services: ResourceServices,
}

/// Builds the runtime for `device` from a network description.
pub fn instantiate_network(
    net: &FbNetwork,
    device: &str,
    options: RuntimeOptions,
) -> Result<ResourceRuntime, NetworkError> {
    if net.device(device).is_none() {
        return Err(NetworkError::UnknownDevice(device.to_string()));
    }
    let resolved = net.resolve()?;
    ResourceRuntime::from_resolved(&resolved, device, options)
}

impl ResourceRuntime {
    pub fn from_resolved(
        resolved: &ResolvedNetwork,
        device: &str,
        options: RuntimeOptions,
    ) -> Result<ResourceRuntime, NetworkError> {
        let net = &resolved.net;
        if net.device(device).is_none() {
            return Err(NetworkError::UnknownDevice(device.to_string()));
        }
        let image = ProcessImage::new();
        let mut instances = Vec::new();
        let mut index = HashMap::new();
        for (g, fb) in net.fbs.iter().enumerate().filter(|(_, f)| f.device == device) {
            let decl = resolved.decls[g].clone();
            let mut inputs: Vec<Value> = decl.data_inputs.iter().map(|(_, k)| k.zero()).collect();
            for (pin, value) in &resolved.params[g] {
                inputs[*pin] = value.clone();
            }
            let outputs = decl.data_outputs.iter().map(|(_, k)| k.zero()).collect();
            match decl.behavior {
                BehaviorKind::Ix => image.register_input(&fb.name),
                BehaviorKind::Qx => image.register_output(&fb.name),
                _ => {}
            }
            index.insert(fb.name.clone(), instances.len());
            instances.push(Instance { name: fb.name.clone(), behavior: make_behavior(&decl), decl, inputs, outputs });
        }
        let mut routes: Vec<Vec<Vec<(usize, usize)>>> =
            instances.iter().map(|i| vec![Vec::new(); i.decl.event_outputs.len()]).collect();
        let mut sources: Vec<Vec<Option<(usize, usize)>>> =
            instances.iter().map(|i| vec![None; i.decl.data_inputs.len()]).collect();
        // connections were validated by resolve(); both ends share a device
        for conn in &net.events {
            if let (Some(&src), Some(&dst)) = (index.get(&conn.from.fb), index.get(&conn.to.fb)) {
                let out = instances[src].decl.event_output(&conn.from.pin).unwrap();
                let inp = instances[dst].decl.event_input(&conn.to.pin).unwrap();
                routes[src][out].push((dst, inp));
            }
        }
        for conn in &net.data {
            if let (Some(&src), Some(&dst)) = (index.get(&conn.from.fb), index.get(&conn.to.fb)) {
                let out = instances[src].decl.data_output(&conn.from.pin).unwrap();
                let inp = instances[dst].decl.data_input(&conn.to.pin).unwrap();
                sources[dst][inp] = Some((src, out));
            }
        }
        Ok(ResourceRuntime {
            device: device.to_string(),
            instances,
            index,
            routes,
            sources,
            queue: Arc::new(EventQueue::new()),
            timers: TimerService::new(),
            services: ResourceServices { image, stats: Arc::new(ResourceStats::default()), options },
        })
    }

    pub fn device(&self) -> &str {
        &self.device
    }

    /// Instance names with their type names, in declaration order.
    pub fn fbs(&self) -> Vec<(String, String)> {
        self.instances.iter().map(|i| (i.name.clone(), i.decl.name.clone())).collect()
    }

    pub fn fb_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn decl(&self, fb: usize) -> &FbTypeDecl {
        &self.instances[fb].decl
    }

    pub fn queue(&self) -> &Arc<EventQueue> {
        &self.queue
    }

    pub fn image(&self) -> &ProcessImage {
        &self.services.image
    }

    pub fn services(&self) -> &ResourceServices {
        &self.services
    }

    pub fn post_event(&self, occ: EventOccurrence) -> Result<(), QueueFull> {
        self.queue.post(occ)
    }

    fn locate(&self, fb: &str) -> Result<usize, RuntimeError> {
        self.fb_index(fb).ok_or_else(|| RuntimeError::UnknownFb(fb.to_string()))
    }

    /// Queues event input `event` of `fb`.
    pub fn trigger(&self, fb: &str, event: &str) -> Result<(), RuntimeError> {
        let i = self.locate(fb)?;
        let e = self.instances[i]
            .decl
            .event_input(event)
            .ok_or_else(|| RuntimeError::UnknownPin(format!("{fb}.{event}")))?;
        Ok(self.queue.post(EventOccurrence::local(i, e))?)
    }

    pub fn input(&self, fb: &str, pin: &str) -> Result<&Value, RuntimeError> {
        let i = self.locate(fb)?;
        let inst = &self.instances[i];
        let p = inst.decl.data_input(pin).ok_or_else(|| RuntimeError::UnknownPin(format!("{fb}.{pin}")))?;
        Ok(&inst.inputs[p])
    }

    pub fn output(&self, fb: &str, pin: &str) -> Result<&Value, RuntimeError> {
        let i = self.locate(fb)?;
        let inst = &self.instances[i];
        let p = inst.decl.data_output(pin).ok_or_else(|| RuntimeError::UnknownPin(format!("{fb}.{pin}")))?;
        Ok(&inst.outputs[p])
    }

    /// Sets an unconnected data input, as a parameter would.
    pub fn set_input(&mut self, fb: &str, pin: &str, value: Value) -> Result<(), RuntimeError> {
        let i = self.locate(fb)?;
        let inst = &mut self.instances[i];
        let p = inst.decl.data_input(pin).ok_or_else(|| RuntimeError::UnknownPin(format!("{fb}.{pin}")))?;
        if value.kind() != inst.decl.data_inputs[p].1 {
            return Err(RuntimeError::Kind { pin: format!("{fb}.{pin}"), got: value.kind() });
        }
        inst.inputs[p] = value;
        Ok(())
    }

    pub fn io_press(&self, input: &str, pressed: bool) -> Result<(), IoError> {
        self.services.image.press(input, pressed)
    }

    pub fn io_led(&self, output: &str) -> Result<bool, IoError> {
        self.services.image.led(output)
    }

    pub fn stats(&self) -> StatsSnapshot {
        snapshot(&self.queue, &self.services)
    }

    /// Queues INIT (with QI set) on every service block and START on every
    /// cycle timer.
    pub fn cold_start(&mut self) {
        let mut starts = Vec::new();
        for (i, inst) in self.instances.iter_mut().enumerate() {
            match inst.decl.behavior {
                BehaviorKind::Sifb(_) => {
                    if self.sources[i][0].is_none() {
                        inst.inputs[0] = Value::Bool(true);
                    }
                    starts.push(EventOccurrence::local(i, 0));
                }
                BehaviorKind::ECycle => starts.push(EventOccurrence::local(i, 0)),
                _ => {}
            }
        }
        // service blocks come up before any timer fires
        starts.sort_by_key(|o| !self.instances[o.fb].decl.is_sifb());
        for occ in starts {
            let _ = self.queue.post(occ);
        }
    }

    /// Queues one tick per expired timer. Returns the number queued.
    pub fn fire_due_timers(&mut self, now: Instant) -> usize {
        let due = self.timers.expire(now);
        let mut posted = 0;
        for fb in due {
            let occ = EventOccurrence { fb, pin: EventPin::Output(0), origin: Origin::Timer };
            if self.queue.post(occ).is_ok() {
                posted += 1;
            }
        }
        posted
    }

    pub fn next_timer_deadline(&self) -> Option<Instant> {
        self.timers.next_deadline()
    }

    /// Executes the occurrence at the head of the queue.
    pub fn step(&mut self) -> StepReport {
        let Some(occ) = self.queue.begin() else {
            return StepReport::Idle;
        };
        let report = self.execute(occ, Instant::now());
        self.queue.done();
        StepReport::Fired(report)
    }

    /// Steps until the queue is empty or `max_steps` have run.
    pub fn run_until_idle(&mut self, max_steps: usize) -> Vec<StepReport> {
        let mut reports = Vec::new();
        while reports.len() < max_steps {
            let report = self.step();
            if report.is_idle() {
                break;
            }
            reports.push(report);
        }
        reports
    }

    fn execute(&mut self, occ: EventOccurrence, now: Instant) -> FiredStep {
        let fb = occ.fb;
        let mut changed = Vec::new();
        for (pin, source) in self.sources[fb].iter().enumerate() {
            if let Some((src, out)) = *source {
                let value = self.instances[src].outputs[out].clone();
                let inst = &mut self.instances[fb];
                if inst.inputs[pin] != value {
                    changed.push((format!("{}.{}", inst.name, inst.decl.data_inputs[pin].0), value.clone()));
                    inst.inputs[pin] = value;
                }
            }
        }

        let Instance { name, decl, inputs, outputs, behavior } = &mut self.instances[fb];
        let before = outputs.clone();
        let origin_kind = occ.origin.kind();
        let event = match occ.pin {
            EventPin::Input(e) => decl.event_inputs[e].clone(),
            EventPin::Output(e) => decl.event_outputs[e].clone(),
        };
        let mut ctx = FbContext {
            fb,
            name,
            decl,
            inputs,
            outputs,
            emitted: Vec::new(),
            timers: &mut self.timers,
            services: &self.services,
            queue: &self.queue,
            now,
        };
        match occ.pin {
            EventPin::Input(e) => behavior.on_event(e, &mut ctx),
            EventPin::Output(e) => behavior.on_output(e, occ.origin, &mut ctx),
        }
        let emitted = ctx.emitted;
        for (pin, (old, new)) in before.iter().zip(outputs.iter()).enumerate() {
            if old != new {
                changed.push((format!("{}.{}", name, decl.data_outputs[pin].0), new.clone()));
            }
        }
        let emitted_names: Vec<String> =
            emitted.iter().map(|e| format!("{}.{}", name, decl.event_outputs[*e])).collect();

        let mut enqueued = 0;
        for e in emitted {
            for &(dst, inp) in &self.routes[fb][e] {
                // a full queue counts the drop itself
                if self.queue.post(EventOccurrence::local(dst, inp)).is_ok() {
                    enqueued += 1;
                }
            }
        }
        FiredStep { fb: name.clone(), event, origin: origin_kind, emitted: emitted_names, changed, enqueued }
    }

    /// Moves the runtime onto its own scheduler thread.
    pub fn spawn(self) -> RunningResource {
        let handle = RuntimeHandle {
            device: self.device.clone(),
            queue: Arc::clone(&self.queue),
            services: self.services.clone(),
            index: Arc::new(self.index.clone()),
            sifbs: Arc::new(self.instances.iter().filter(|i| i.decl.is_sifb()).map(|i| i.name.clone()).collect()),
        };
        let thread = thread::Builder::new()
            .name(format!("resource-{}", self.device))
            .spawn(move || {
                let mut rt = self;
                rt.run_loop();
                rt
            })
            .expect("spawn scheduler thread");
        RunningResource { handle, thread: Some(thread) }
    }

    fn run_loop(&mut self) {
        const BATCH: usize = 64;
        while !self.queue.is_stopped() {
            self.fire_due_timers(Instant::now());
            for _ in 0..BATCH {
                if self.step().is_idle() {
                    break;
                }
            }
            if self.queue.is_empty() {
                self.queue.wait_for_work(self.timers.next_deadline());
            }
        }
    }

    /// Tears down every service block.
    pub fn shutdown(&mut self) {
        for inst in &mut self.instances {
            inst.behavior.shutdown();
        }
    }
}

impl Drop for ResourceRuntime {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn snapshot(queue: &EventQueue, services: &ResourceServices) -> StatsSnapshot {
    let stats = &services.stats;
    let meter = services.options.stack.meter.snapshot();
    StatsSnapshot {
        drops: queue.dropped(),
        decode_errors: stats.decode_errors.load(Ordering::SeqCst),
        orphan_responses: stats.orphan_responses.load(Ordering::SeqCst),
        ignored_requests: stats.ignored_requests.load(Ordering::SeqCst),
        send_failures: stats.send_failures.load(Ordering::SeqCst),
        tx_bytes: meter.tx_bytes,
        rx_bytes: meter.rx_bytes,
        tx_msgs: meter.tx_msgs,
        rx_msgs: meter.rx_msgs,
    }
}

/// Thread-safe access to a running resource.
#[derive(Clone)]
pub struct RuntimeHandle {
    device: String,
    queue: Arc<EventQueue>,
    services: ResourceServices,
    index: Arc<HashMap<String, usize>>,
    sifbs: Arc<Vec<String>>,
}

impl RuntimeHandle {
    pub fn device(&self) -> &str {
        &self.device
    }

    pub fn post_event(&self, occ: EventOccurrence) -> Result<(), QueueFull> {
        self.queue.post(occ)
    }

    pub fn fb_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn sifb_names(&self) -> &[String] {
        &self.sifbs
    }

    pub fn image(&self) -> &ProcessImage {
        &self.services.image
    }

    /// Momentary press; returns once the press was sampled and the
    /// resulting events have run.
    pub fn press(&self, input: &str, timeout: Duration) -> Result<(), IoError> {
        let image = &self.services.image;
        image.press_momentary(input)?;
        image.wait_sampled(input, timeout)?;
        self.queue.wait_idle(timeout);
        Ok(())
    }

    pub fn leds(&self) -> Vec<(String, bool)> {
        self.services.image.leds()
    }

    pub fn stats(&self) -> StatsSnapshot {
        snapshot(&self.queue, &self.services)
    }

    pub fn wait_idle(&self, timeout: Duration) -> bool {
        self.queue.wait_idle(timeout)
    }
}

/// A runtime executing on its scheduler thread.
pub struct RunningResource {
    handle: RuntimeHandle,
    thread: Option<JoinHandle<ResourceRuntime>>,
}

impl RunningResource {
    pub fn handle(&self) -> &RuntimeHandle {
        &self.handle
    }

    /// Stops the scheduler and hands the runtime back.
    pub fn stop(mut self) -> ResourceRuntime {
        self.join().expect("scheduler thread panicked")
    }

    fn join(&mut self) -> Option<ResourceRuntime> {
        self.handle.queue.stop();
        self.thread.take().and_then(|t| t.join().ok())
    }
}

impl Drop for RunningResource {
    fn drop(&mut self) {
        self.join();
    }
}

//! The streaming loop: steps the twin, records every frame, publishes frames
//! to a [`FrameBus`] and feeds incoming commands into the simulation.
//!
//! Frames are stamped with simulation time. Wall-clock pacing is optional
//! and only throttles the loop; it never changes frame contents.

use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::bus::{FrameBus, StreamItem};
use super::protocol::{self, Message, WireCommand};
use super::record::SessionRecord;
use super::GapMarker;
use crate::sim::Simulation;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("stream rate {rate} Hz must be a positive divisor of the {sim_rate} Hz tick rate")]
    InvalidRate { rate: u32, sim_rate: u32 },
}

/// The sink refuses further items; the stream ends cleanly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("sink closed")]
pub struct SinkClosed;

pub trait FrameSink: Send + 'static {
    fn deliver(&mut self, item: &StreamItem) -> Result<(), SinkClosed>;
}

/// Collects everything it is given.
#[derive(Debug, Clone, Default)]
pub struct VecSink {
    pub items: Arc<Mutex<Vec<StreamItem>>>,
}

impl FrameSink for VecSink {
    fn deliver(&mut self, item: &StreamItem) -> Result<(), SinkClosed> {
        self.items.lock().unwrap().push(item.clone());
        Ok(())
    }
}

/// Writes length-prefixed protocol messages. Any write error closes the sink.
pub struct WriterSink<W: Write + Send + 'static>(pub W);

impl<W: Write + Send + 'static> FrameSink for WriterSink<W> {
    fn deliver(&mut self, item: &StreamItem) -> Result<(), SinkClosed> {
        protocol::write_message(&mut self.0, &item_message(item)).map_err(|_| SinkClosed)
    }
}

pub fn item_message(item: &StreamItem) -> Message {
    match item {
        StreamItem::Frame(f) => Message::Frame((**f).clone()),
        StreamItem::Gap(g) => Message::Gap(*g),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamEnd {
    /// Ran for the requested number of ticks.
    Completed,
    /// Stopped on request.
    Stopped,
    SinkClosed,
    /// The simulation aborted.
    Failed(String),
}

/// Shared stop request with the reason of the first requester.
#[derive(Debug, Clone, Default)]
pub struct StopToken {
    flag: Arc<AtomicBool>,
    reason: Arc<Mutex<Option<StreamEnd>>>,
}

impl StopToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn request(&self, reason: StreamEnd) {
        let mut r = self.reason.lock().unwrap();
        if r.is_none() {
            *r = Some(reason);
        }
        self.flag.store(true, Ordering::SeqCst);
    }

    pub fn is_requested(&self) -> bool {
        self.flag.load(Ordering::SeqCst)
    }

    fn reason(&self) -> Option<StreamEnd> {
        self.reason.lock().unwrap().clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopOptions {
    /// Publish every n-th tick.
    pub publish_every: u64,
    /// Stop after this many ticks; `None` runs until stopped.
    pub ticks: Option<u64>,
    /// Pace ticks against the wall clock.
    pub realtime: bool,
}

#[derive(Debug, Clone)]
pub struct LoopReport {
    pub record: SessionRecord,
    pub frames_published: u64,
    pub end: StreamEnd,
}

/// Runs the simulation loop on the calling thread until `opts.ticks` is
/// reached or `stop` is requested, then closes `bus`.
///
/// All commands waiting in `commands` are submitted before each tick, in
/// arrival order.
pub fn run_loop(
    mut sim: Simulation,
    bus: &FrameBus,
    commands: &Receiver<WireCommand>,
    opts: LoopOptions,
    stop: &StopToken,
) -> LoopReport {
    let mut record = SessionRecord::new(sim.config().clone(), *sim.scene());
    let dt = Duration::from_secs_f64(sim.dt());
    let start = Instant::now();
    let mut published = 0;
    // Events from ticks that are not published ride on the next published frame.
    let mut carried = Vec::new();
    let mut end = StreamEnd::Completed;

    loop {
        if stop.is_requested() {
            end = stop.reason().unwrap_or(StreamEnd::Stopped);
            break;
        }
        if opts.ticks.is_some_and(|n| sim.tick() >= n) {
            break;
        }
        while let Ok(cmd) = commands.try_recv() {
            sim.submit(cmd);
        }
        let frame = match sim.step() {
            Ok(f) => f,
            Err(e) => {
                log::error!("simulation aborted: {e}");
                end = StreamEnd::Failed(e.to_string());
                break;
            }
        };
        if frame.tick % opts.publish_every == 0 {
            let mut out = frame.clone();
            if !carried.is_empty() {
                carried.append(&mut out.events);
                out.events = std::mem::take(&mut carried);
            }
            bus.publish(out);
            published += 1;
        } else {
            carried.extend_from_slice(&frame.events);
        }
        record.push_frame(frame);
        if opts.realtime {
            let deadline = start + dt * (sim.tick() as u32);
            let now = Instant::now();
            if deadline > now {
                thread::sleep(deadline - now);
            }
        }
    }
    bus.close();
    record.commands = sim.command_log().to_vec();
    LoopReport {
        record,
        frames_published: published,
        end,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamOptions {
    /// Frames per second delivered to the sink.
    pub rate: u32,
    /// Simulation ticks to run; `None` runs until stopped.
    pub ticks: Option<u64>,
    pub realtime: bool,
    /// Frames buffered for a stalled sink before the oldest are dropped.
    pub capacity: usize,
}

impl StreamOptions {
    pub fn from_config(config: &crate::config::Config) -> Self {
        Self {
            rate: config.telemetry.rate,
            ticks: None,
            realtime: false,
            capacity: config.telemetry.buffer_capacity,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StreamReport {
    pub record: SessionRecord,
    pub frames_published: u64,
    pub frames_delivered: u64,
    pub gaps: Vec<GapMarker>,
    pub end: StreamEnd,
}

pub struct SessionHandle {
    stop: StopToken,
    commands: Sender<WireCommand>,
    producer: JoinHandle<LoopReport>,
    consumer: JoinHandle<(u64, Vec<GapMarker>)>,
}

impl SessionHandle {
    /// Command ingress. Unbounded and lossless.
    pub fn commands(&self) -> Sender<WireCommand> {
        self.commands.clone()
    }

    pub fn stop(&self) {
        self.stop.request(StreamEnd::Stopped);
    }

    pub fn join(self) -> StreamReport {
        let report = self.producer.join().expect("simulation thread panicked");
        let (delivered, gaps) = self.consumer.join().expect("sink thread panicked");
        StreamReport {
            record: report.record,
            frames_published: report.frames_published,
            frames_delivered: delivered,
            gaps,
            end: report.end,
        }
    }
}

/// Starts the simulation on its own thread and streams frames to `sink` from
/// another. A stalled sink loses frames oldest-first and later receives a gap
/// marker; commands are never dropped.
pub fn stream_session<S: FrameSink>(
    sim: Simulation,
    mut sink: S,
    opts: StreamOptions,
) -> Result<SessionHandle, StreamError> {
    let sim_rate = sim.config().telemetry.sim_rate;
    if opts.rate == 0 || !sim_rate.is_multiple_of(opts.rate) {
        return Err(StreamError::InvalidRate {
            rate: opts.rate,
            sim_rate,
        });
    }
    let loop_opts = LoopOptions {
        publish_every: u64::from(sim_rate / opts.rate),
        ticks: opts.ticks,
        realtime: opts.realtime,
    };
    let bus = FrameBus::new();
    let sub = bus.subscribe(opts.capacity);
    let stop = StopToken::new();
    let (tx, rx) = mpsc::channel();

    let consumer_stop = stop.clone();
    let consumer = thread::spawn(move || {
        let mut delivered = 0;
        let mut gaps = Vec::new();
        while let Ok(item) = sub.recv() {
            if sink.deliver(&item).is_err() {
                consumer_stop.request(StreamEnd::SinkClosed);
                break;
            }
            match item {
                StreamItem::Frame(_) => delivered += 1,
                StreamItem::Gap(g) => gaps.push(g),
            }
        }
        (delivered, gaps)
    });
    let producer_stop = stop.clone();
    let producer = thread::spawn(move || run_loop(sim, &bus, &rx, loop_opts, &producer_stop));

    Ok(SessionHandle {
        stop,
        commands: tx,
        producer,
        consumer,
    })
}

//! Parallel batch dispatch to external evaluator workers.
//!
//! Each worker is a bidirectional line stream (spawned process stdio, a TCP
//! socket, or an in-process thread). Workers pull jobs from one shared queue,
//! so faster workers take more of the batch. A request that times out or
//! draws a malformed reply quarantines its worker for the rest of the pool's
//! life and goes back on the queue for someone else, up to `retries` extra
//! attempts. Results are always returned in input order.

use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::protocol::{decode_response, encode_request, serve, Request, Response};
use super::AccuracyOracle;
use crate::error::{Error, Result};
use crate::genotype::CompressedModelSpec;
use crate::scoring::Accuracy;

/// Environment variable overriding the number of spawned workers.
pub const WORKERS_ENV: &str = "COMPSEARCH_WORKERS";

/// Worker section of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkerPoolConfig {
    /// Program and arguments of a worker process, spawned `count` times.
    pub command: Option<Vec<String>>,
    pub count: usize,
    /// Addresses of already-running TCP workers.
    pub tcp: Vec<String>,
    pub in_flight: usize,
    pub timeout_secs: f64,
    pub retries: u32,
}

impl Default for WorkerPoolConfig {
    fn default() -> Self {
        WorkerPoolConfig {
            command: None,
            count: 1,
            tcp: Vec::new(),
            in_flight: 1,
            timeout_secs: 300.0,
            retries: 2,
        }
    }
}

impl WorkerPoolConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match &self.command {
            Some(c) if c.is_empty() => out.push("workers.command must name a program".into()),
            None if self.tcp.is_empty() => {
                out.push("workers needs a command or at least one tcp address".into())
            }
            _ => {}
        }
        if self.command.is_some() && self.count == 0 {
            out.push("workers.count must be positive".into());
        }
        if self.in_flight == 0 {
            out.push("workers.in_flight must be positive".into());
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            out.push("workers.timeout_secs must be positive".into());
        }
        out
    }

    /// Applies the [`WORKERS_ENV`] override, if set.
    pub fn with_env_override(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(WORKERS_ENV) {
            self.count = v
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("{WORKERS_ENV}={v} is not a worker count")))?;
        }
        Ok(self)
    }

    pub fn settings(&self) -> PoolSettings {
        PoolSettings {
            in_flight: self.in_flight,
            timeout: Duration::from_secs_f64(self.timeout_secs),
            retries: self.retries,
        }
    }

    /// Spawns / connects every configured worker.
    pub fn connect(&self, arch_name: &str) -> Result<WorkerPool> {
        let problems = self.problems();
        if !problems.is_empty() {
            return Err(Error::ConfigList(problems));
        }
        let mut conns = Vec::new();
        if let Some(cmd) = &self.command {
            for _ in 0..self.count {
                conns.push(WorkerConnection::spawn(cmd)?);
            }
        }
        for addr in &self.tcp {
            conns.push(WorkerConnection::tcp(addr)?);
        }
        Ok(WorkerPool::new(conns, self.settings(), arch_name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolSettings {
    pub in_flight: usize,
    pub timeout: Duration,
    pub retries: u32,
}

impl Default for PoolSettings {
    fn default() -> Self {
        WorkerPoolConfig::default().settings()
    }
}

/// One worker endpoint.
pub struct WorkerConnection {
    label: String,
    writer: Box<dyn Write + Send>,
    lines: Receiver<Option<String>>,
    child: Option<Child>,
    alive: bool,
}

impl std::fmt::Debug for WorkerConnection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkerConnection")
            .field("label", &self.label)
            .field("alive", &self.alive)
            .finish()
    }
}

impl WorkerConnection {
    /// Wraps an arbitrary stream pair. A background thread forwards lines
    /// from `reader`.
    pub fn from_streams<R, W>(label: impl Into<String>, reader: R, writer: W) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(Some(l)).is_err() {
                            return;
                        }
                    }
                    Err(_) => break,
                }
            }
            let _ = tx.send(None);
        });
        WorkerConnection {
            label: label.into(),
            writer: Box::new(writer),
            lines: rx,
            child: None,
            alive: true,
        }
    }

    /// Spawns `command[0]` with the remaining arguments and talks to it over
    /// stdin/stdout.
    pub fn spawn(command: &[String]) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::config("empty worker command"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::oracle(format!("cannot spawn worker '{program}': {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut conn = Self::from_streams(format!("{program}#{}", child.id()), stdout, stdin);
        conn.child = Some(child);
        Ok(conn)
    }

    pub fn tcp(addr: &str) -> Result<Self> {
        let stream = TcpStream::connect(addr)
            .map_err(|e| Error::oracle(format!("cannot connect to worker {addr}: {e}")))?;
        let _ = stream.set_nodelay(true);
        let reader = stream
            .try_clone()
            .map_err(|e| Error::oracle(format!("worker {addr}: {e}")))?;
        Ok(Self::from_streams(format!("tcp:{addr}"), reader, stream))
    }

    /// Runs `handler` on a background thread behind an in-memory pipe pair,
    /// speaking the same wire protocol as an external worker.
    pub fn in_process<F>(label: impl Into<String>, handler: F) -> Result<Self>
    where
        F: FnMut(&Request) -> std::result::Result<f64, String> + Send + 'static,
    {
        let (req_rx, req_tx) = std::io::pipe().map_err(|e| Error::oracle(e.to_string()))?;
        let (resp_rx, resp_tx) = std::io::pipe().map_err(|e| Error::oracle(e.to_string()))?;
        thread::spawn(move || {
            let _ = serve(BufReader::new(req_rx), resp_tx, handler);
        });
        Ok(Self::from_streams(label, resp_rx, req_tx))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_alive(&self) -> bool {
        self.alive
    }

    fn send(&mut self, req: &Request) -> std::io::Result<()> {
        let line = encode_request(req);
        writeln!(self.writer, "{line}")?;
        self.writer.flush()
    }
}

impl Drop for WorkerConnection {
    fn drop(&mut self) {
        // closing stdin lets a well-behaved worker exit on its own
        self.writer = Box::new(std::io::sink());
        if let Some(child) = &mut self.child {
            let deadline = Instant::now() + Duration::from_millis(500);
            loop {
                match child.try_wait() {
                    Ok(Some(_)) => return,
                    Ok(None) if Instant::now() < deadline => {
                        thread::sleep(Duration::from_millis(5))
                    }
                    _ => break,
                }
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Job {
    index: usize,
    attempts: u32,
}

struct Shared {
    queue: VecDeque<Job>,
    results: Vec<Option<f64>>,
    remaining: usize,
    alive: usize,
    failure: Option<String>,
}

impl Shared {
    fn finished(&self) -> bool {
        self.remaining == 0 || self.failure.is_some()
    }
}

/// Oracle backed by a set of external workers.
#[derive(Debug)]
pub struct WorkerPool {
    workers: Vec<WorkerConnection>,
    settings: PoolSettings,
    arch_name: String,
    next_id: AtomicU64,
}

impl WorkerPool {
    pub fn new(
        workers: Vec<WorkerConnection>,
        settings: PoolSettings,
        arch_name: impl Into<String>,
    ) -> Self {
        WorkerPool {
            workers,
            settings,
            arch_name: arch_name.into(),
            next_id: AtomicU64::new(0),
        }
    }

    pub fn healthy_workers(&self) -> usize {
        self.workers.iter().filter(|w| w.alive).count()
    }

    pub fn len(&self) -> usize {
        self.workers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workers.is_empty()
    }

    /// Evaluates `specs` across the healthy workers.
    pub fn dispatch(&mut self, specs: &[CompressedModelSpec]) -> Result<Vec<f64>> {
        if specs.is_empty() {
            return Ok(Vec::new());
        }
        let alive = self.healthy_workers();
        if alive == 0 {
            return Err(Error::oracle("no healthy workers"));
        }
        let shared = Mutex::new(Shared {
            queue: (0..specs.len())
                .map(|index| Job { index, attempts: 0 })
                .collect(),
            results: vec![None; specs.len()],
            remaining: specs.len(),
            alive,
            failure: None,
        });
        let wake = Condvar::new();
        let settings = self.settings;
        let arch_name = self.arch_name.as_str();
        let next_id = &self.next_id;

        thread::scope(|scope| {
            for conn in self.workers.iter_mut().filter(|w| w.alive) {
                let ctx = WorkerCtx {
                    shared: &shared,
                    wake: &wake,
                    specs,
                    settings,
                    arch_name,
                    next_id,
                };
                scope.spawn(move || ctx.drive(conn));
            }
        });

        let shared = shared.into_inner().expect("dispatch state poisoned");
        if let Some(msg) = shared.failure {
            let done = shared.results.iter().filter(|r| r.is_some()).count();
            let missing: Vec<usize> = shared
                .results
                .iter()
                .enumerate()
                .filter_map(|(i, r)| r.is_none().then_some(i))
                .collect();
            return Err(Error::oracle(format!(
                "{msg}; {done}/{} results completed, missing indices {missing:?}",
                specs.len()
            )));
        }
        shared
            .results
            .into_iter()
            .map(|r| {
                r.ok_or_else(|| Error::Invariant("dispatch finished with a missing result".into()))
            })
            .collect()
    }
}

impl AccuracyOracle for WorkerPool {
    fn evaluate_batch(&mut self, specs: &[CompressedModelSpec]) -> Result<Vec<Accuracy>> {
        self.dispatch(specs)?
            .into_iter()
            .map(Accuracy::new)
            .collect()
    }
}

struct WorkerCtx<'a> {
    shared: &'a Mutex<Shared>,
    wake: &'a Condvar,
    specs: &'a [CompressedModelSpec],
    settings: PoolSettings,
    arch_name: &'a str,
    next_id: &'a AtomicU64,
}

impl WorkerCtx<'_> {
    fn drive(&self, conn: &mut WorkerConnection) {
        let mut in_flight: HashMap<u64, (Job, Instant)> = HashMap::new();
        loop {
            let mut fresh = Vec::new();
            {
                let mut s = self.shared.lock().expect("dispatch state poisoned");
                loop {
                    if s.finished() {
                        return;
                    }
                    while in_flight.len() + fresh.len() < self.settings.in_flight {
                        match s.queue.pop_front() {
                            Some(job) => fresh.push(job),
                            None => break,
                        }
                    }
                    if !in_flight.is_empty() || !fresh.is_empty() {
                        break;
                    }
                    s = self
                        .wake
                        .wait_timeout(s, Duration::from_millis(50))
                        .expect("dispatch state poisoned")
                        .0;
                }
            }

            for job in fresh {
                let id = self.next_id.fetch_add(1, Ordering::Relaxed);
                let req = Request {
                    id,
                    spec: self.specs[job.index].clone(),
                    arch: self.arch_name.to_string(),
                };
                in_flight.insert(id, (job, Instant::now()));
                if let Err(e) = conn.send(&req) {
                    self.quarantine(conn, in_flight, &format!("write failed: {e}"));
                    return;
                }
            }

            let oldest = in_flight
                .values()
                .map(|(_, t)| *t)
                .min()
                .expect("in-flight request");
            let wait = (oldest + self.settings.timeout).saturating_duration_since(Instant::now());
            match conn.lines.recv_timeout(wait) {
                Ok(Some(line)) => match decode_response(&line) {
                    Ok(Response::Accuracy(reply)) => {
                        if let Some((job, _)) = in_flight.remove(&reply.id) {
                            let mut s = self.shared.lock().expect("dispatch state poisoned");
                            if s.results[job.index].is_none() {
                                s.results[job.index] = Some(reply.accuracy);
                                s.remaining -= 1;
                            }
                            self.wake.notify_all();
                        } else {
                            debug!("{}: ignoring reply for unknown id {}", conn.label, reply.id);
                        }
                    }
                    Ok(Response::Error(reply)) => {
                        match reply.id.and_then(|id| in_flight.remove(&id)) {
                            Some((job, _)) => {
                                warn!("{}: job {} failed: {}", conn.label, job.index, reply.error);
                                let mut s = self.shared.lock().expect("dispatch state poisoned");
                                self.requeue(&mut s, job, &reply.error);
                                self.wake.notify_all();
                            }
                            None => {
                                self.quarantine(
                                    conn,
                                    in_flight,
                                    &format!("worker rejected request: {}", reply.error),
                                );
                                return;
                            }
                        }
                    }
                    Err(e) => {
                        self.quarantine(conn, in_flight, &format!("malformed reply: {e}"));
                        return;
                    }
                },
                Ok(None) | Err(RecvTimeoutError::Disconnected) => {
                    self.quarantine(conn, in_flight, "worker closed its output");
                    return;
                }
                Err(RecvTimeoutError::Timeout) => {
                    self.quarantine(conn, in_flight, "request timed out");
                    return;
                }
            }
        }
    }

    fn requeue(&self, s: &mut Shared, mut job: Job, reason: &str) {
        job.attempts += 1;
        if job.attempts > self.settings.retries {
            if s.failure.is_none() {
                s.failure = Some(format!(
                    "spec {} failed after {} attempts (last: {reason})",
                    job.index, job.attempts
                ));
            }
        } else {
            s.queue.push_front(job);
        }
    }

    fn quarantine(
        &self,
        conn: &mut WorkerConnection,
        in_flight: HashMap<u64, (Job, Instant)>,
        reason: &str,
    ) {
        warn!("quarantining worker {}: {reason}", conn.label);
        conn.alive = false;
        let mut s = self.shared.lock().expect("dispatch state poisoned");
        let mut jobs: Vec<Job> = in_flight.into_values().map(|(j, _)| j).collect();
        jobs.sort_by_key(|j| std::cmp::Reverse(j.index));
        for job in jobs {
            self.requeue(&mut s, job, reason);
        }
        s.alive -= 1;
        if s.alive == 0 && s.remaining > 0 && s.failure.is_none() {
            s.failure = Some(format!(
                "all workers failed (last: {} {reason})",
                conn.label
            ));
        }
        self.wake.notify_all();
    }
}

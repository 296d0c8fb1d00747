//! Worker child processes for self-contained local runs.

use std::io::{BufRead, BufReader};
use std::process::{Child, Command, Stdio};

use crate::CliError;

/// Prefix of the line a worker prints once it accepts connections.
pub const READY: &str = "listening on ";

/// Worker processes that are killed and reaped on drop.
pub struct ChildWorkers {
    children: Vec<Child>,
    addresses: Vec<String>,
}

impl ChildWorkers {
    /// Starts `n` copies of this executable in worker mode on ephemeral ports.
    pub fn spawn(n: usize) -> Result<Self, CliError> {
        let exe = std::env::current_exe()
            .map_err(|e| CliError::Config(format!("cannot locate own executable: {e}")))?;
        let mut workers = ChildWorkers {
            children: Vec::with_capacity(n),
            addresses: Vec::with_capacity(n),
        };
        for i in 0..n {
            let mut child = Command::new(&exe)
                .args(["worker", "--port", "0", "--threads", "1", "--id"])
                .arg(format!("bench-{i}"))
                .stdin(Stdio::null())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| CliError::Transport(format!("cannot start worker process: {e}")))?;
            let stdout = child.stdout.take().expect("piped stdout");
            workers.children.push(child);
            let mut line = String::new();
            BufReader::new(stdout)
                .read_line(&mut line)
                .map_err(|e| CliError::Transport(format!("worker {i} did not report its address: {e}")))?;
            let addr = line
                .trim()
                .split_once(READY)
                .map(|(_, a)| a.to_string())
                .ok_or_else(|| CliError::Transport(format!("worker {i} failed to start: {line:?}")))?;
            workers.addresses.push(addr);
        }
        Ok(workers)
    }

    pub fn addresses(&self) -> &[String] {
        &self.addresses
    }
}

impl Drop for ChildWorkers {
    fn drop(&mut self) {
        for child in &mut self.children {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

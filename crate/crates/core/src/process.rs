//! Running an external command with optional stdin and a hard timeout.

use std::io::{self, Read, Write};
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::Duration;

use thiserror::Error;
use wait_timeout::ChildExt;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("could not start command: {0}")]
    Spawn(io::Error),
    #[error("command timed out after {0:?}")]
    TimedOut(Duration),
    #[error("i/o error talking to command: {0}")]
    Io(io::Error),
}

#[derive(Debug)]
pub struct CommandOutput {
    pub status: ExitStatus,
    pub stdout: Vec<u8>,
}

/// Runs `command`, feeding `input` on stdin, and collects stdout. The child is
/// killed if it outlives `timeout`. Stderr is discarded.
pub fn run(mut command: Command, input: Option<&[u8]>, timeout: Duration) -> Result<CommandOutput, RunError> {
    command
        .stdin(if input.is_some() { Stdio::piped() } else { Stdio::null() })
        .stdout(Stdio::piped())
        .stderr(Stdio::null());
    let mut child = command.spawn().map_err(RunError::Spawn)?;

    // stdin and stdout are serviced on their own threads so a chatty child
    // cannot deadlock against a full pipe.
    let writer = match (input, child.stdin.take()) {
        (Some(bytes), Some(mut stdin)) => {
            let bytes = bytes.to_vec();
            Some(thread::spawn(move || {
                // a child that exits without reading is not our error
                let _ = stdin.write_all(&bytes);
            }))
        }
        _ => None,
    };
    let mut stdout = child.stdout.take().expect("stdout is piped");
    let reader = thread::spawn(move || {
        let mut buf = Vec::new();
        stdout.read_to_end(&mut buf).map(|_| buf)
    });

    let status = match child.wait_timeout(timeout).map_err(RunError::Io)? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(RunError::TimedOut(timeout));
        }
    };
    if let Some(w) = writer {
        let _ = w.join();
    }
    let stdout = reader.join().expect("reader thread").map_err(RunError::Io)?;
    Ok(CommandOutput { status, stdout })
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;

    #[test]
    fn echoes_stdin() {
        let out = run(Command::new("cat"), Some(b"hello"), Duration::from_secs(5)).unwrap();
        assert!(out.status.success());
        assert_eq!(out.stdout, b"hello");
    }

    #[test]
    fn kills_on_timeout() {
        let mut cmd = Command::new("sleep");
        cmd.arg("5");
        assert!(matches!(run(cmd, None, Duration::from_millis(100)), Err(RunError::TimedOut(_))));
    }

    #[test]
    fn missing_program() {
        let cmd = Command::new("/nonexistent/program");
        assert!(matches!(run(cmd, None, Duration::from_secs(1)), Err(RunError::Spawn(_))));
    }
}

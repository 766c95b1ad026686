use std::io::{self, BufRead, Write};

use edubot_core::{Engine, SessionState};

pub const PROMPT: &str = "You: ";
pub const QUIT: &str = "/quit";

/// Terminal conversation over one session. Returns the number of exchanges.
///
/// Blank lines re-prompt without reaching the engine. Store errors are
/// printed and the loop continues.
pub fn run_repl<R: BufRead, W: Write>(engine: &Engine, input: R, mut out: W) -> io::Result<usize> {
    let mut session = SessionState::new("repl");
    let mut exchanges = 0;
    let mut lines = input.lines();
    loop {
        write!(out, "{PROMPT}")?;
        out.flush()?;
        let Some(line) = lines.next().transpose()? else {
            writeln!(out)?;
            break;
        };
        let line = line.trim();
        if line == QUIT {
            break;
        }
        if line.is_empty() {
            continue;
        }
        let reply = engine.get_response(&mut session, line);
        if let Some(e) = &reply.store_error {
            writeln!(out, "error: {e}")?;
        }
        writeln!(out, "Bot: {}", reply.result.text)?;
        exchanges += 1;
    }
    Ok(exchanges)
}

//! Leveled stderr logging controlled by the SKA_LOG_LEVEL environment
//! variable (error, warn, info, debug; default info).

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Error,
    Warn,
    Info,
    Debug,
}

fn level() -> Level {
    static LEVEL: OnceLock<Level> = OnceLock::new();
    *LEVEL.get_or_init(|| {
        match std::env::var("SKA_LOG_LEVEL")
            .unwrap_or_default()
            .to_ascii_lowercase()
            .as_str()
        {
            "error" => Level::Error,
            "warn" => Level::Warn,
            "info" | "" => Level::Info,
            "debug" => Level::Debug,
            other => {
                eprintln!("warn: unrecognized SKA_LOG_LEVEL {other:?}, using info");
                Level::Info
            }
        }
    })
}

pub fn error(msg: impl AsRef<str>) {
    eprintln!("error: {}", msg.as_ref());
}

pub fn info(msg: impl AsRef<str>) {
    if level() >= Level::Info {
        eprintln!("info: {}", msg.as_ref());
    }
}

pub fn debug(msg: impl AsRef<str>) {
    if level() >= Level::Debug {
        eprintln!("debug: {}", msg.as_ref());
    }
}

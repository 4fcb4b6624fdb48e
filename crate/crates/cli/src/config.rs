//! `--config` files: `name = value` lines that become flags placed before
//! the user's own, so explicit flags win.

use std::ffi::OsString;

use anyhow::{bail, Context};

/// Turn config text into flag arguments. `true` becomes a bare switch and
/// `false` drops the setting.
pub fn config_to_args(text: &str) -> anyhow::Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((name, value)) = line.split_once('=') else {
            bail!("config line {}: expected `name = value`, found `{line}`", i + 1);
        };
        let name = name.trim().replace('_', "-");
        let value = value.trim();
        if name.is_empty() || name.starts_with('-') {
            bail!("config line {}: bad setting name `{name}`", i + 1);
        }
        match value {
            "true" => out.push(format!("--{name}").into()),
            "false" => {}
            v => {
                out.push(format!("--{name}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

/// Remove `--config PATH` from `args` and splice the file's settings in
/// directly after the subcommand name.
pub fn expand(args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        if arg == "--" {
            rest.push(arg);
            rest.extend(iter.by_ref());
            break;
        }
        if arg == "--config" {
            let path = iter.next().context("--config needs a file path")?;
            config = Some(path);
        } else if let Some(path) = arg.to_str().and_then(|s| s.strip_prefix("--config=")) {
            config = Some(path.into());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| {
        anyhow::Error::new(e).context(format!("reading config {}", path.to_string_lossy()))
    })?;
    let extra = config_to_args(&text)?;
    let at = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map_or(rest.len(), |p| p + 2);
    rest.splice(at..at, extra);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_settings() {
        let args = config_to_args("# c\nseed = 7\nper_tile = true\nverbose=false\n\nsubtask=1").unwrap();
        assert_eq!(args, os(&["--seed", "7", "--per-tile", "--subtask", "1"]));
        assert!(config_to_args("seed 7").is_err());
        assert!(config_to_args("= 7").is_err());
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "seed = 3\n").unwrap();
        let p = path.to_str().unwrap();
        let got = expand(os(&["encmatch", "--config", p, "encode", "--seed", "9"])).unwrap();
        assert_eq!(got, os(&["encmatch", "encode", "--seed", "3", "--seed", "9"]));
        let got = expand(os(&["encmatch", "keygen", &format!("--config={p}")])).unwrap();
        assert_eq!(got, os(&["encmatch", "keygen", "--seed", "3"]));
        let untouched = os(&["encmatch", "selftest"]);
        assert_eq!(expand(untouched.clone()).unwrap(), untouched);
        assert!(expand(os(&["encmatch", "selftest", "--config"])).is_err());
    }
}

//! Numbered image sequences addressed by a printf-style pattern such as
//! `frames/%06d.png`, and a loader thread that decodes ahead of the tracker.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver};
use std::thread;

/// Pattern used when a bare directory is given.
pub const DEFAULT_NAME: &str = "%06d.png";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePattern {
    dir: PathBuf,
    prefix: String,
    /// Zero-padded width, from `%0Nd`.
    width: usize,
    suffix: String,
}

impl FramePattern {
    /// Parse a pattern with exactly one `%d` or `%0Nd` in its file name.
    /// A plain directory means `<dir>/%06d.png`.
    pub fn parse(pattern: &str) -> Result<Self, String> {
        let path = Path::new(pattern);
        if !pattern.contains('%') {
            if path.is_dir() {
                return Self::parse(&path.join(DEFAULT_NAME).to_string_lossy());
            }
            return Err(format!("{pattern:?} is neither a directory nor a %d pattern"));
        }
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .filter(|n| n.contains('%'))
            .ok_or_else(|| format!("{pattern:?}: the frame number must be in the file name"))?;
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let start = name.find('%').unwrap();
        let rest = &name[start + 1..];
        let d = rest
            .find('d')
            .ok_or_else(|| format!("{pattern:?}: expected %d or %0Nd"))?;
        let spec = &rest[..d];
        let width = match spec {
            "" => 0,
            s if s.starts_with('0') && s.len() > 1 && s.bytes().all(|b| b.is_ascii_digit()) => {
                s[1..].parse().map_err(|_| format!("{pattern:?}: bad width"))?
            }
            _ => return Err(format!("{pattern:?}: expected %d or %0Nd")),
        };
        let suffix = rest[d + 1..].to_string();
        if suffix.contains('%') {
            return Err(format!("{pattern:?}: only one frame number allowed"));
        }
        Ok(FramePattern {
            dir,
            prefix: name[..start].to_string(),
            width,
            suffix,
        })
    }

    pub fn file_name(&self, n: u64) -> String {
        format!("{}{:0w$}{}", self.prefix, n, self.suffix, w = self.width)
    }

    pub fn path(&self, n: u64) -> PathBuf {
        self.dir.join(self.file_name(n))
    }

    /// Frame number of a file name this pattern would produce.
    pub fn number(&self, name: &str) -> Option<u64> {
        let digits = name.strip_prefix(&self.prefix)?.strip_suffix(&self.suffix)?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let n = digits.parse().ok()?;
        (self.file_name(n) == name).then_some(n)
    }

    /// Existing files matching the pattern, ordered by frame number.
    pub fn list(&self) -> io::Result<Vec<(u64, PathBuf)>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let entry = entry?;
            if let Some(n) = entry.file_name().to_str().and_then(|s| self.number(s)) {
                out.push((n, entry.path()));
            }
        }
        out.sort();
        Ok(out)
    }
}

/// Run `load` over `items` on a background thread, at most `depth` ahead of
/// the consumer. Items arrive in input order. Dropping the receiver stops
/// the thread after its current item.
pub fn prefetch<I, T, F>(items: Vec<I>, depth: usize, load: F) -> Receiver<T>
where
    I: Send + 'static,
    T: Send + 'static,
    F: Fn(I) -> T + Send + 'static,
{
    let (tx, rx) = sync_channel(depth);
    thread::spawn(move || {
        for item in items {
            if tx.send(load(item)).is_err() {
                break;
            }
        }
    });
    rx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_formats() {
        let p = FramePattern::parse("seq/img_%06d.png").unwrap();
        assert_eq!(p.path(42), PathBuf::from("seq/img_000042.png"));
        assert_eq!(p.number("img_000042.png"), Some(42));
        assert_eq!(p.number("img_42.png"), None);
        assert_eq!(p.number("img_000042.ppm"), None);
        assert_eq!(p.number("img_1234567.png"), Some(1234567));

        let q = FramePattern::parse("%d.pgm").unwrap();
        assert_eq!(q.path(7), PathBuf::from("./7.pgm"));
        assert_eq!(q.number("007.pgm"), None);

        for bad in ["seq/%s.png", "seq/%6d.png", "seq/%d_%d.png", "%06d/x.png", "nothing-here"] {
            assert!(FramePattern::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn lists_matching_files_in_numeric_order() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["000010.png", "000002.png", "000001.png", "notes.txt", "000003.jpg", "12.png"] {
            fs::write(dir.path().join(name), b"").unwrap();
        }
        let p = FramePattern::parse(dir.path().to_str().unwrap()).unwrap();
        let found: Vec<u64> = p.list().unwrap().into_iter().map(|f| f.0).collect();
        assert_eq!(found, vec![1, 2, 10]);
    }

    #[test]
    fn prefetch_preserves_order() {
        let rx = prefetch((0..100).collect(), 2, |i: u64| i * i);
        let got: Vec<u64> = rx.iter().collect();
        assert_eq!(got, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }
}

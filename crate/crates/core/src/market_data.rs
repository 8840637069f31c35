//! Five-minute OHLCV bars and their assembly into complete RTH sessions.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BAR_HEADER: [&str; 6] = ["timestamp", "open", "high", "low", "close", "volume"];
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// One OHLCV record. Prices are index points, volume is contracts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub timestamp: NaiveDateTime,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: u64,
}

impl Bar {
    /// Checks the OHLC envelope: positive prices, `low <= min(open, close)`,
    /// `high >= max(open, close)`.
    pub fn check(&self) -> std::result::Result<(), String> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err("prices must be finite and positive".into());
        }
        if self.high < self.low {
            return Err(format!("high {} < low {}", self.high, self.low));
        }
        if self.low > self.open.min(self.close) {
            return Err(format!("low {} above open/close", self.low));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!("high {} below open/close", self.high));
        }
        Ok(())
    }

    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }

    pub fn time(&self) -> NaiveTime {
        self.timestamp.time()
    }

    /// Relative change within the bar, `close / open - 1`.
    pub fn ret(&self) -> f64 {
        self.close / self.open - 1.0
    }
}

/// Delimited-text layout of a bar file.
#[derive(Debug, Clone)]
pub struct FormatSpec {
    pub delimiter: u8,
    pub timestamp_format: String,
}

impl Default for FormatSpec {
    fn default() -> Self {
        Self {
            delimiter: b',',
            timestamp_format: TIMESTAMP_FORMAT.to_string(),
        }
    }
}

/// Parses a header-bearing bar file. Rows must be strictly increasing in time.
pub fn parse_bars<R: Read>(reader: R, format: &FormatSpec) -> Result<Vec<Bar>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    if header.iter().ne(BAR_HEADER.iter().copied()) {
        return Err(Error::BadHeader {
            expected: BAR_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut bars: Vec<Bar> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |reason: String| Error::MalformedRow { line, reason };
        if record.len() != BAR_HEADER.len() {
            return Err(malformed(format!(
                "expected {} fields, found {}",
                BAR_HEADER.len(),
                record.len()
            )));
        }
        let timestamp = NaiveDateTime::parse_from_str(&record[0], &format.timestamp_format)
            .map_err(|e| malformed(format!("timestamp `{}`: {e}", &record[0])))?;
        let mut px = [0.0f64; 4];
        for (k, slot) in px.iter_mut().enumerate() {
            let field = &record[k + 1];
            *slot = field
                .parse()
                .map_err(|_| malformed(format!("{} `{field}` is not a number", BAR_HEADER[k + 1])))?;
        }
        let volume: u64 = record[5]
            .parse()
            .map_err(|_| malformed(format!("volume `{}` is not a non-negative integer", &record[5])))?;
        let bar = Bar {
            timestamp,
            open: px[0],
            high: px[1],
            low: px[2],
            close: px[3],
            volume,
        };
        bar.check()
            .map_err(|reason| Error::InconsistentBar { line, reason })?;

        if let Some(prev) = bars.last() {
            if bar.timestamp == prev.timestamp {
                return Err(Error::DuplicateTimestamp {
                    line,
                    timestamp: record[0].to_string(),
                });
            }
            if bar.timestamp < prev.timestamp {
                return Err(Error::NonMonotonic {
                    line,
                    timestamp: record[0].to_string(),
                });
            }
        }
        bars.push(bar);
    }
    Ok(bars)
}

pub fn read_bars_file(path: &Path) -> Result<Vec<Bar>> {
    parse_bars(File::open(path)?, &FormatSpec::default())
}

/// Writes bars in the same layout [`parse_bars`] reads. Prices use the
/// shortest representation that parses back to the identical `f64`.
pub fn write_bars<'a, W: Write>(out: W, bars: impl IntoIterator<Item = &'a Bar>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BAR_HEADER)?;
    for b in bars {
        w.write_record([
            b.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
            b.volume.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Regular-trading-hours window. The window is half-open: a bar stamped
/// exactly `session_end` is outside the session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub session_start: NaiveTime,
    pub session_end: NaiveTime,
    pub bar_minutes: u32,
    pub expected_bars: usize,
}

impl SessionSpec {
    pub fn new(session_start: NaiveTime, session_end: NaiveTime, bar_minutes: u32) -> Result<Self> {
        if bar_minutes == 0 {
            return Err(Error::InvalidConfig("bar_minutes must be positive".into()));
        }
        let span = (session_end - session_start).num_minutes();
        if span <= 0 || span % bar_minutes as i64 != 0 {
            return Err(Error::InvalidConfig(format!(
                "session span of {span} minutes is not a positive multiple of {bar_minutes}"
            )));
        }
        Ok(Self {
            session_start,
            session_end,
            bar_minutes,
            expected_bars: (span / bar_minutes as i64) as usize,
        })
    }

    /// 09:30–16:00 in 5-minute bars, 78 per day.
    pub fn rth() -> Self {
        Self::new(
            NaiveTime::from_hms_opt(9, 30, 0).unwrap(),
            NaiveTime::from_hms_opt(16, 0, 0).unwrap(),
            5,
        )
        .expect("static RTH spec is valid")
    }

    /// Number of bars covering `minutes` of session time.
    pub fn bars_in(&self, minutes: u32) -> usize {
        (minutes / self.bar_minutes) as usize
    }

    /// Start time of the bar at zero-based position `index`.
    pub fn bar_time(&self, index: usize) -> NaiveTime {
        self.session_start + Duration::minutes(index as i64 * self.bar_minutes as i64)
    }

    pub fn contains(&self, t: NaiveTime) -> bool {
        t >= self.session_start && t < self.session_end
    }

    fn validate(&self) -> Result<()> {
        let check = Self::new(self.session_start, self.session_end, self.bar_minutes)?;
        if check.expected_bars != self.expected_bars {
            return Err(Error::InvalidConfig(format!(
                "expected_bars {} does not tile the session ({} bars)",
                self.expected_bars, check.expected_bars
            )));
        }
        Ok(())
    }
}

impl Default for SessionSpec {
    fn default() -> Self {
        Self::rth()
    }
}

/// One complete trading day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub date: NaiveDate,
    pub bars: Vec<Bar>,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: u64,
    pub first_bar_volume: u64,
}

impl Session {
    /// Builds the session aggregates. `bars` must be non-empty.
    pub fn from_bars(date: NaiveDate, bars: Vec<Bar>) -> Self {
        assert!(!bars.is_empty(), "session needs at least one bar");
        let high = bars.iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max);
        let low = bars.iter().map(|b| b.low).fold(f64::INFINITY, f64::min);
        Self {
            date,
            open: bars[0].open,
            close: bars[bars.len() - 1].close,
            high,
            low,
            volume: bars.iter().map(|b| b.volume).sum(),
            first_bar_volume: bars[0].volume,
            bars,
        }
    }

    pub fn range(&self) -> f64 {
        self.high - self.low
    }

    pub fn weekday(&self) -> Weekday {
        self.date.weekday()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    BarCount,
    Misaligned,
}

/// Structured warning for a dropped day, serialized as one JSON line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub date: NaiveDate,
    pub reason: SkipReason,
    pub bar_count: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Assembly {
    pub sessions: Vec<Session>,
    pub skipped: Vec<SkipRecord>,
}

/// Groups bars by calendar date, keeps those inside the session window and
/// drops any day that is not exactly `expected_bars` aligned bars.
pub fn assemble_sessions(bars: &[Bar], spec: &SessionSpec) -> Result<Assembly> {
    spec.validate()?;
    let mut by_day: BTreeMap<NaiveDate, Vec<Bar>> = BTreeMap::new();
    for bar in bars {
        let day = by_day.entry(bar.date()).or_default();
        if spec.contains(bar.time()) {
            day.push(*bar);
        }
    }

    let mut out = Assembly::default();
    for (date, mut day) in by_day {
        day.sort_by_key(|b| b.timestamp);
        let bar_count = day.len();
        let reason = if bar_count != spec.expected_bars {
            Some(SkipReason::BarCount)
        } else if day
            .iter()
            .enumerate()
            .any(|(i, b)| b.time() != spec.bar_time(i))
        {
            Some(SkipReason::Misaligned)
        } else {
            None
        };
        match reason {
            Some(reason) => {
                log::warn!("skipping {date}: {reason:?} ({bar_count} bars)");
                out.skipped.push(SkipRecord {
                    date,
                    reason,
                    bar_count,
                });
            }
            None => out.sessions.push(Session::from_bars(date, day)),
        }
    }
    Ok(out)
}

/// Writes one JSON object per skipped day.
pub fn write_skip_log<W: Write>(mut out: W, skipped: &[SkipRecord]) -> Result<()> {
    for rec in skipped {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(d: &str, t: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(&format!("{d}T{t}"), TIMESTAMP_FORMAT).unwrap()
    }

    fn flat_day(date: NaiveDate, spec: &SessionSpec) -> Vec<Bar> {
        (0..spec.expected_bars)
            .map(|i| Bar {
                timestamp: date.and_time(spec.bar_time(i)),
                open: 100.0 + i as f64,
                high: 101.5 + i as f64,
                low: 99.0 + i as f64,
                close: 100.5 + i as f64,
                volume: 10 + i as u64,
            })
            .collect()
    }

    #[test]
    fn parses_three_rows() {
        let text = "timestamp,open,high,low,close,volume\n\
                    2024-01-02T09:30:00,100,101,99,100.5,10\n\
                    2024-01-02T09:35:00,100.5,102,100,101,12\n\
                    2024-01-02T09:40:00,101,101.25,100.75,101,3\n";
        let bars = parse_bars(text.as_bytes(), &FormatSpec::default()).unwrap();
        assert_eq!(bars.len(), 3);
        assert_eq!(bars[1].timestamp, ts("2024-01-02", "09:35:00"));
        assert_eq!(bars[2].volume, 3);
        assert!(bars.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
    }

    #[test]
    fn high_below_low_names_line() {
        let text = "timestamp,open,high,low,close,volume\n\
                    2024-01-02T09:30:00,100,101,99,100.5,10\n\
                    2024-01-02T09:35:00,100,99,101,100,12\n";
        match parse_bars(text.as_bytes(), &FormatSpec::default()) {
            Err(Error::InconsistentBar { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates_and_reordering() {
        let dup = "timestamp,open,high,low,close,volume\n\
                   2024-01-02T09:30:00,100,101,99,100.5,10\n\
                   2024-01-02T09:30:00,100,101,99,100.5,10\n";
        assert!(matches!(
            parse_bars(dup.as_bytes(), &FormatSpec::default()),
            Err(Error::DuplicateTimestamp { line: 3, .. })
        ));
        let back = "timestamp,open,high,low,close,volume\n\
                    2024-01-02T09:35:00,100,101,99,100.5,10\n\
                    2024-01-02T09:30:00,100,101,99,100.5,10\n";
        assert!(matches!(
            parse_bars(back.as_bytes(), &FormatSpec::default()),
            Err(Error::NonMonotonic { line: 3, .. })
        ));
    }

    #[test]
    fn malformed_rows() {
        let text = "timestamp,open,high,low,close,volume\n2024-01-02T09:30:00,abc,101,99,100,1\n";
        assert!(matches!(
            parse_bars(text.as_bytes(), &FormatSpec::default()),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let short = "timestamp,open,high,low,close,volume\n2024-01-02T09:30:00,100,101\n";
        assert!(matches!(
            parse_bars(short.as_bytes(), &FormatSpec::default()),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let neg_vol = "timestamp,open,high,low,close,volume\n2024-01-02T09:30:00,100,101,99,100,-1\n";
        assert!(parse_bars(neg_vol.as_bytes(), &FormatSpec::default()).is_err());
        let bad_header = "time,open,high,low,close,volume\n";
        assert!(matches!(
            parse_bars(bad_header.as_bytes(), &FormatSpec::default()),
            Err(Error::BadHeader { .. })
        ));
    }

    #[test]
    fn one_day_extremes_match_naive_parse() {
        let spec = SessionSpec::rth();
        let date = NaiveDate::from_ymd_opt(2024, 3, 4).unwrap();
        let mut buf = Vec::new();
        write_bars(&mut buf, &flat_day(date, &spec)).unwrap();
        let text = String::from_utf8(buf).unwrap();

        // naive reference: split each line by hand
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            hi = hi.max(f[2].parse().unwrap());
            lo = lo.min(f[3].parse().unwrap());
        }
        let bars = parse_bars(text.as_bytes(), &FormatSpec::default()).unwrap();
        assert_eq!(bars.len(), 78);
        let s = Session::from_bars(date, bars);
        assert_eq!(s.low, lo);
        assert_eq!(s.high, hi);
    }

    #[test]
    fn spec_tiles_exactly() {
        assert_eq!(SessionSpec::rth().expected_bars, 78);
        assert_eq!(SessionSpec::rth().bars_in(60), 12);
        let bad = SessionSpec::new(
            NaiveTime::from_hms_opt(9, 30, 0).unwrap(),
            NaiveTime::from_hms_opt(16, 2, 0).unwrap(),
            5,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn assembles_complete_days_only() {
        let spec = SessionSpec::rth();
        let d1 = NaiveDate::from_ymd_opt(2024, 3, 4).unwrap();
        let d2 = NaiveDate::from_ymd_opt(2024, 3, 5).unwrap();
        let mut bars = flat_day(d1, &spec);
        bars.extend(flat_day(d2, &spec));
        let asm = assemble_sessions(&bars, &spec).unwrap();
        assert_eq!(asm.sessions.len(), 2);
        assert!(asm.skipped.is_empty());

        let mut short = flat_day(d1, &spec);
        short.pop();
        let asm = assemble_sessions(&short, &spec).unwrap();
        assert!(asm.sessions.is_empty());
        assert_eq!(
            asm.skipped,
            vec![SkipRecord {
                date: d1,
                reason: SkipReason::BarCount,
                bar_count: 77
            }]
        );
    }

    #[test]
    fn closing_bar_is_outside_half_open_window() {
        let spec = SessionSpec::rth();
        let days: Vec<NaiveDate> = (4..7)
            .map(|d| NaiveDate::from_ymd_opt(2024, 3, d).unwrap())
            .collect();
        let mut bars = Vec::new();
        for (k, d) in days.iter().enumerate() {
            bars.extend(flat_day(*d, &spec));
            if k == 1 {
                bars.push(Bar {
                    timestamp: ts("2024-03-05", "16:00:00"),
                    open: 50.0,
                    high: 500.0,
                    low: 1.0,
                    close: 60.0,
                    volume: 999,
                });
            }
        }
        let asm = assemble_sessions(&bars, &spec).unwrap();
        assert_eq!(asm.sessions.len(), 3);
        // brute-force filter by wall-clock range
        let expected: Vec<Bar> = bars
            .iter()
            .filter(|b| b.date() == days[1])
            .filter(|b| b.time() >= spec.session_start && b.time() < spec.session_end)
            .copied()
            .collect();
        assert_eq!(asm.sessions[1].bars, expected);
        assert_eq!(asm.sessions[1].bars.len(), 78);
        assert_ne!(asm.sessions[1].high, 500.0);
    }

    #[test]
    fn misaligned_day_is_dropped() {
        let spec = SessionSpec::rth();
        let d = NaiveDate::from_ymd_opt(2024, 3, 4).unwrap();
        let mut bars = flat_day(d, &spec);
        bars[10].timestamp += Duration::minutes(1);
        let asm = assemble_sessions(&bars, &spec).unwrap();
        assert_eq!(asm.skipped[0].reason, SkipReason::Misaligned);
        let mut line = Vec::new();
        write_skip_log(&mut line, &asm.skipped).unwrap();
        assert_eq!(
            String::from_utf8(line).unwrap(),
            "{\"date\":\"2024-03-04\",\"reason\":\"misaligned\",\"bar_count\":78}\n"
        );
    }
}

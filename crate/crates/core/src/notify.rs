//! Notification templates, the outbox and delivery transports.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::model::{AccountId, Channel, Locale, Notification, OutboxEntry, Roster, Shift};

pub const TIME_OFF_REQUESTED: &str = "time_off_requested";
pub const TIME_OFF_APPROVED: &str = "time_off_approved";
pub const TIME_OFF_DENIED: &str = "time_off_denied";
pub const SHIFT_CLAIMED: &str = "shift_claimed";
pub const GIVE_UP_OFFERED: &str = "give_up_offered";
pub const GIVE_UP_COMPLETED: &str = "give_up_completed";
pub const SHIFT_DROPPED: &str = "shift_dropped";
pub const SWAP_REQUESTED: &str = "swap_requested";
pub const SWAP_PENDING_APPROVAL: &str = "swap_pending_approval";
pub const SWAP_COMPLETED: &str = "swap_completed";
pub const SWAP_REJECTED: &str = "swap_rejected";
pub const ASSIGNED: &str = "shift_assigned";
pub const UNASSIGNED: &str = "shift_unassigned";

macro_rules! catalog {
    ($($key:literal),* $(,)?) => {
        pub const TEMPLATES: &[&str] = &[$($key),*];

        fn source(locale: Locale, key: &str) -> Option<&'static str> {
            match (locale, key) {
                $(
                    (Locale::En, $key) => Some(include_str!(concat!("../templates/en/", $key, ".txt"))),
                    (Locale::Fr, $key) => Some(include_str!(concat!("../templates/fr/", $key, ".txt"))),
                )*
                _ => None,
            }
        }
    };
}

catalog!(
    "time_off_requested",
    "time_off_approved",
    "time_off_denied",
    "shift_claimed",
    "give_up_offered",
    "give_up_completed",
    "shift_dropped",
    "swap_requested",
    "swap_pending_approval",
    "swap_completed",
    "swap_rejected",
    "shift_assigned",
    "shift_unassigned",
);

/// Placeholders every payload built by [`payload`] defines.
pub const PLACEHOLDERS: &[&str] = &["recipient", "actor", "counterparty", "schedule", "shift", "start", "end", "reason"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("no template {key:?} for locale {locale}")]
    UnknownTemplate { key: String, locale: Locale },
    #[error("template {key:?} uses undefined placeholder {{{name}}}")]
    MissingPlaceholder { key: String, name: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RenderedMessage {
    pub seq: u64,
    pub channel: Channel,
    pub to: String,
    pub template: String,
    pub subject: String,
    pub body: String,
}

pub fn template_source(locale: Locale, key: &str) -> Option<&'static str> {
    source(locale, key)
}

/// Substitutes `{name}` placeholders. The first line is the subject.
pub fn render(locale: Locale, key: &str, payload: &BTreeMap<String, String>) -> Result<(String, String), RenderError> {
    let text = source(locale, key).ok_or_else(|| RenderError::UnknownTemplate { key: key.to_string(), locale })?;
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let Some(close) = after.find('}') else {
            out.push_str(&rest[open..]);
            rest = "";
            break;
        };
        let name = &after[..close];
        let value = payload.get(name).ok_or_else(|| RenderError::MissingPlaceholder { key: key.to_string(), name: name.to_string() })?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    let (subject, body) = out.split_once('\n').unwrap_or((out.as_str(), ""));
    Ok((subject.trim().to_string(), body.trim_start_matches('\n').to_string()))
}

/// A payload with every standard placeholder set, filled from a shift when given.
pub fn payload(roster: &Roster, recipient: AccountId, actor: Option<AccountId>, shift: Option<&Shift>) -> BTreeMap<String, String> {
    let zone = roster.settings.display_zone;
    let mut p: BTreeMap<String, String> = PLACEHOLDERS.iter().map(|k| (k.to_string(), String::new())).collect();
    p.insert("recipient".into(), roster.account_label(recipient));
    if let Some(actor) = actor {
        p.insert("actor".into(), roster.account_label(actor));
    }
    if let Some(shift) = shift {
        let schedule = roster.schedules.get(&shift.schedule).map(|s| s.name.clone()).unwrap_or_default();
        p.insert("schedule".into(), schedule);
        p.insert("shift".into(), shift.title.clone());
        p.insert("start".into(), shift.interval.start.local(zone).format("%Y-%m-%d %H:%M").to_string());
        p.insert("end".into(), shift.interval.end.local(zone).format("%Y-%m-%d %H:%M").to_string());
    }
    p
}

/// Queues a notification in the outbox. Unknown and anonymized recipients
/// are skipped.
pub fn push(roster: &mut Roster, recipient: AccountId, template: &str, payload: BTreeMap<String, String>) {
    if !roster.accounts.get(&recipient).is_some_and(|a| !a.anonymized) {
        return;
    }
    let seq = roster.outbox.last().map_or(1, |e| e.seq + 1);
    let notification = Notification { recipient, template: template.to_string(), locale: roster.settings.locale_default, payload, channel: Channel::Email };
    roster.outbox.push(OutboxEntry { seq, notification, delivered: false });
}

pub(crate) fn shift_changed(roster: &mut Roster, shift: &Shift, account: AccountId, template: &str) {
    let p = payload(roster, account, None, Some(shift));
    push(roster, account, template, p);
}

pub trait Transport {
    fn deliver(&mut self, message: &RenderedMessage) -> io::Result<()>;
}

/// Appends one JSON line per message to a file.
pub struct FileSink {
    path: PathBuf,
}

impl FileSink {
    pub fn new(path: impl AsRef<Path>) -> Self {
        Self { path: path.as_ref().to_path_buf() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn open(&self) -> io::Result<File> {
        OpenOptions::new().create(true).append(true).open(&self.path)
    }
}

impl Transport for FileSink {
    fn deliver(&mut self, message: &RenderedMessage) -> io::Result<()> {
        let mut file = self.open()?;
        let line = serde_json::to_string(message).map_err(io::Error::other)?;
        writeln!(file, "{line}")
    }
}

/// Collects messages in memory.
#[derive(Default)]
pub struct MemorySink {
    pub messages: Vec<RenderedMessage>,
}

impl Transport for MemorySink {
    fn deliver(&mut self, message: &RenderedMessage) -> io::Result<()> {
        self.messages.push(message.clone());
        Ok(())
    }
}

/// Renders one outbox entry for delivery. `None` when the recipient is gone.
pub fn render_entry(roster: &Roster, entry: &OutboxEntry) -> Option<Result<RenderedMessage, RenderError>> {
    let n = &entry.notification;
    let account = roster.accounts.get(&n.recipient).filter(|a| !a.anonymized)?;
    Some(render(n.locale, &n.template, &n.payload).map(|(subject, body)| RenderedMessage {
        seq: entry.seq,
        channel: n.channel,
        to: account.email.clone(),
        template: n.template.clone(),
        subject,
        body,
    }))
}

/// Sends every undelivered entry and marks it delivered. Entries whose
/// recipient no longer exists are marked delivered without sending.
/// Stops at the first transport failure.
pub fn deliver_pending(roster: &mut Roster, transport: &mut dyn Transport) -> io::Result<usize> {
    let mut sent = 0;
    for i in 0..roster.outbox.len() {
        if roster.outbox[i].delivered {
            continue;
        }
        match render_entry(roster, &roster.outbox[i]) {
            Some(Ok(message)) => {
                transport.deliver(&message)?;
                sent += 1;
            }
            Some(Err(e)) => return Err(io::Error::other(e)),
            None => {}
        }
        roster.outbox[i].delivered = true;
    }
    Ok(sent)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_payload() -> BTreeMap<String, String> {
        PLACEHOLDERS.iter().map(|k| (k.to_string(), format!("<{k}>"))).collect()
    }

    #[test]
    fn every_template_exists_in_both_locales_and_resolves() {
        for key in TEMPLATES {
            for locale in Locale::ALL {
                let (subject, body) = render(locale, key, &full_payload()).unwrap();
                assert!(!subject.is_empty() && !body.is_empty(), "{locale} {key}");
                assert!(!subject.contains('{') && !body.contains('{'), "{locale} {key}");
            }
        }
    }

    #[test]
    fn template_files_on_disk_match_catalog() {
        for locale in Locale::ALL {
            let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("templates").join(locale.as_str());
            let mut on_disk: Vec<String> = std::fs::read_dir(dir)
                .unwrap()
                .map(|e| e.unwrap().file_name().to_string_lossy().trim_end_matches(".txt").to_string())
                .collect();
            on_disk.sort();
            let mut listed: Vec<String> = TEMPLATES.iter().map(|s| s.to_string()).collect();
            listed.sort();
            assert_eq!(on_disk, listed, "{locale}");
        }
    }

    #[test]
    fn missing_placeholder_is_an_error() {
        let err = render(Locale::En, ASSIGNED, &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, RenderError::MissingPlaceholder { .. }));
        assert!(matches!(render(Locale::Fr, "nope", &BTreeMap::new()), Err(RenderError::UnknownTemplate { .. })));
    }

    #[test]
    fn file_sink_appends_lines() {
        let dir = std::env::temp_dir().join(format!("rosterd-sink-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("outbox.jsonl");
        let _ = std::fs::remove_file(&path);
        let mut r = Roster::new();
        let id = AccountId(r.allocate());
        r.upsert_account(crate::model::Account::new(id, "A", "B", "a@x.org")).unwrap();
        for _ in 0..2 {
            let p = payload(&r, id, None, None);
            push(&mut r, id, TIME_OFF_APPROVED, p);
        }
        let mut sink = FileSink::new(&path);
        assert_eq!(deliver_pending(&mut r, &mut sink).unwrap(), 2);
        assert_eq!(deliver_pending(&mut r, &mut sink).unwrap(), 0);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("a@x.org"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}

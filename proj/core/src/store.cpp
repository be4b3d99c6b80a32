#include "gravekit/store.hpp"

#include "gravekit/error.hpp"

#include <sqlite3.h>

#include <sstream>

namespace gravekit {

namespace {

constexpr const char* kSchema = R"sql(
PRAGMA foreign_keys = ON;
CREATE TABLE IF NOT EXISTS documents (
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  id TEXT UNIQUE,
  title TEXT NOT NULL,
  source_ref TEXT NOT NULL,
  page_count INTEGER NOT NULL,
  scale_mode TEXT NOT NULL,
  fixed_ratio REAL,
  page_height_cm REAL
);
CREATE TABLE IF NOT EXISTS pages (
  id TEXT PRIMARY KEY,
  document_id TEXT NOT NULL REFERENCES documents(id),
  idx INTEGER NOT NULL,
  width_px INTEGER NOT NULL,
  height_px INTEGER NOT NULL,
  dpi REAL,
  image_ref TEXT NOT NULL,
  image BLOB NOT NULL,
  UNIQUE (document_id, idx)
);
CREATE TABLE IF NOT EXISTS detections (
  page_id TEXT NOT NULL REFERENCES pages(id),
  id TEXT NOT NULL,
  body TEXT NOT NULL,
  PRIMARY KEY (page_id, id)
);
CREATE INDEX IF NOT EXISTS detections_by_page ON detections(page_id);
CREATE TABLE IF NOT EXISTS records (
  rowid_ INTEGER PRIMARY KEY AUTOINCREMENT,
  document_id TEXT NOT NULL REFERENCES documents(id),
  page_index INTEGER NOT NULL,
  grave_detection_id TEXT NOT NULL,
  publication_grave_id TEXT,
  status TEXT NOT NULL,
  version INTEGER NOT NULL,
  body TEXT NOT NULL,
  UNIQUE (document_id, grave_detection_id)
);
CREATE UNIQUE INDEX IF NOT EXISTS live_grave_ids ON records(document_id, publication_grave_id)
  WHERE status <> 'Discarded' AND publication_grave_id IS NOT NULL;
CREATE TABLE IF NOT EXISTS edit_log (
  record_rowid INTEGER NOT NULL REFERENCES records(rowid_),
  seq INTEGER NOT NULL,
  timestamp TEXT NOT NULL,
  step INTEGER NOT NULL,
  change TEXT NOT NULL,
  PRIMARY KEY (record_rowid, seq)
);
CREATE TRIGGER IF NOT EXISTS edit_log_append_only BEFORE UPDATE ON edit_log
BEGIN SELECT RAISE(ABORT, 'edit_log is append-only'); END;
CREATE TRIGGER IF NOT EXISTS pages_immutable BEFORE UPDATE ON pages
BEGIN SELECT RAISE(ABORT, 'pages are immutable'); END;
)sql";

class Statement {
public:
    Statement(sqlite3* db, const char* sql) : db_(db) {
        if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
            throw Error(ErrorCode::StorageFailure, sqlite3_errmsg(db));
        }
    }
    ~Statement() { sqlite3_finalize(stmt_); }
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;

    Statement& bind(int i, const std::string& v) {
        check(sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
        return *this;
    }
    Statement& bind(int i, std::int64_t v) {
        check(sqlite3_bind_int64(stmt_, i, v));
        return *this;
    }
    Statement& bind(int i, int v) { return bind(i, static_cast<std::int64_t>(v)); }
    Statement& bind(int i, std::optional<double> v) {
        check(v ? sqlite3_bind_double(stmt_, i, *v) : sqlite3_bind_null(stmt_, i));
        return *this;
    }
    Statement& bind_null(int i) {
        check(sqlite3_bind_null(stmt_, i));
        return *this;
    }
    Statement& bind_blob(int i, const std::vector<std::uint8_t>& v) {
        check(sqlite3_bind_blob(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
        return *this;
    }

    /// True while rows are available.
    bool step() {
        const int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        last_error_ = sqlite3_extended_errcode(db_);
        throw Error(ErrorCode::StorageFailure, sqlite3_errmsg(db_));
    }

    std::string text(int col) const {
        const auto* p = sqlite3_column_text(stmt_, col);
        return p ? std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)))
                 : std::string();
    }
    std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }
    std::optional<double> real(int col) const {
        if (sqlite3_column_type(stmt_, col) == SQLITE_NULL) return std::nullopt;
        return sqlite3_column_double(stmt_, col);
    }
    std::vector<std::uint8_t> blob(int col) const {
        const auto* p = static_cast<const std::uint8_t*>(sqlite3_column_blob(stmt_, col));
        return std::vector<std::uint8_t>(p, p + sqlite3_column_bytes(stmt_, col));
    }

private:
    void check(int rc) {
        if (rc != SQLITE_OK) throw Error(ErrorCode::StorageFailure, sqlite3_errmsg(db_));
    }

    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
    int last_error_ = 0;
};

/// Rolls back unless committed.
class Transaction {
public:
    explicit Transaction(sqlite3* db) : db_(db) { run("BEGIN IMMEDIATE"); }
    ~Transaction() {
        if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
    }
    void commit() {
        run("COMMIT");
        done_ = true;
    }

private:
    void run(const char* sql) {
        char* err = nullptr;
        if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
            std::string msg = err ? err : "transaction failure";
            sqlite3_free(err);
            throw Error(ErrorCode::StorageFailure, msg);
        }
    }

    sqlite3* db_;
    bool done_ = false;
};

std::string record_id_for(std::int64_t rowid) { return "r" + std::to_string(rowid); }

std::optional<std::int64_t> rowid_for(const std::string& record_id) {
    if (record_id.size() < 2 || record_id[0] != 'r') return std::nullopt;
    try {
        std::size_t used = 0;
        const long long v = std::stoll(record_id.substr(1), &used);
        if (used != record_id.size() - 1) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

Page page_from_row(const Statement& s) {
    Page p;
    p.id = s.text(0);
    p.document_id = s.text(1);
    p.index = static_cast<int>(s.integer(2));
    p.width_px = static_cast<int>(s.integer(3));
    p.height_px = static_cast<int>(s.integer(4));
    p.dpi = s.real(5);
    p.image_ref = s.text(6);
    return p;
}

Document document_from_row(const Statement& s) {
    Document d;
    d.id = s.text(0);
    d.title = s.text(1);
    d.source_ref = s.text(2);
    d.page_count = static_cast<int>(s.integer(3));
    d.scale.mode = s.text(4) == "FixedRatio" ? ScaleMode::FixedRatio : ScaleMode::PerDrawing;
    d.scale.fixed_ratio = s.real(5);
    d.scale.page_height_cm = s.real(6);
    return d;
}

nlohmann::json detection_json(const Detection& d) {
    return nlohmann::json::parse(serialize_detections({d}));
}

std::string record_body(const GraveRecord& r) {
    auto j = to_json(r);
    j.erase("edit_log");
    return j.dump();
}

}  // namespace

Store::Store(const std::string& path) {
    if (sqlite3_open_v2(path.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                        nullptr) != SQLITE_OK) {
        std::string msg = db_ ? sqlite3_errmsg(db_) : "cannot open database";
        sqlite3_close(db_);
        throw Error(ErrorCode::StorageFailure, msg);
    }
    sqlite3_busy_timeout(db_, 5000);
    exec(kSchema);
}

Store::~Store() { sqlite3_close(db_); }

void Store::exec(const char* sql) const {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "sqlite error";
        sqlite3_free(err);
        throw Error(ErrorCode::StorageFailure, msg);
    }
}

Document Store::insert_document(const DocumentMeta& meta, const std::vector<Page>& pages,
                                const std::vector<std::vector<std::uint8_t>>& images) {
    std::lock_guard lock(mutex_);
    Transaction tx(db_);
    Statement ins(db_,
                  "INSERT INTO documents (title, source_ref, page_count, scale_mode, fixed_ratio, page_height_cm) "
                  "VALUES (?, ?, ?, ?, ?, ?)");
    ins.bind(1, meta.title).bind(2, meta.source_ref).bind(3, static_cast<int>(pages.size()));
    ins.bind(4, std::string(to_string(meta.scale.mode))).bind(5, meta.scale.fixed_ratio).bind(6, meta.scale.page_height_cm);
    ins.step();
    const std::int64_t seq = sqlite3_last_insert_rowid(db_);
    Document doc;
    doc.id = "doc" + std::to_string(seq);
    doc.title = meta.title;
    doc.source_ref = meta.source_ref;
    doc.page_count = static_cast<int>(pages.size());
    doc.scale = meta.scale;
    Statement set_id(db_, "UPDATE documents SET id = ? WHERE seq = ?");
    set_id.bind(1, doc.id).bind(2, seq);
    set_id.step();

    for (std::size_t i = 0; i < pages.size(); ++i) {
        const Page& p = pages[i];
        Statement pg(db_,
                     "INSERT INTO pages (id, document_id, idx, width_px, height_px, dpi, image_ref, image) "
                     "VALUES (?, ?, ?, ?, ?, ?, ?, ?)");
        pg.bind(1, doc.id + "-p" + std::to_string(p.index)).bind(2, doc.id).bind(3, p.index);
        pg.bind(4, p.width_px).bind(5, p.height_px).bind(6, p.dpi).bind(7, p.image_ref).bind_blob(8, images.at(i));
        pg.step();
    }
    tx.commit();
    return doc;
}

std::optional<Document> Store::document(const std::string& id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_,
                "SELECT id, title, source_ref, page_count, scale_mode, fixed_ratio, page_height_cm "
                "FROM documents WHERE id = ?");
    s.bind(1, id);
    if (!s.step()) return std::nullopt;
    return document_from_row(s);
}

std::vector<Document> Store::documents() const {
    std::lock_guard lock(mutex_);
    Statement s(db_,
                "SELECT id, title, source_ref, page_count, scale_mode, fixed_ratio, page_height_cm "
                "FROM documents ORDER BY seq");
    std::vector<Document> out;
    while (s.step()) out.push_back(document_from_row(s));
    return out;
}

std::vector<Page> Store::pages(const std::string& document_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_,
                "SELECT id, document_id, idx, width_px, height_px, dpi, image_ref FROM pages "
                "WHERE document_id = ? ORDER BY idx");
    s.bind(1, document_id);
    std::vector<Page> out;
    while (s.step()) out.push_back(page_from_row(s));
    return out;
}

std::optional<Page> Store::page(const std::string& page_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT id, document_id, idx, width_px, height_px, dpi, image_ref FROM pages WHERE id = ?");
    s.bind(1, page_id);
    if (!s.step()) return std::nullopt;
    return page_from_row(s);
}

std::vector<std::uint8_t> Store::page_image(const std::string& page_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT image FROM pages WHERE id = ?");
    s.bind(1, page_id);
    if (!s.step()) throw Error(ErrorCode::UnknownPage, page_id);
    return s.blob(0);
}

void Store::put_detections(const std::vector<Detection>& detections) {
    std::lock_guard lock(mutex_);
    Transaction tx(db_);
    for (const Detection& d : detections) {
        Statement s(db_, "INSERT INTO detections (page_id, id, body) VALUES (?, ?, ?) "
                         "ON CONFLICT (page_id, id) DO UPDATE SET body = excluded.body");
        s.bind(1, d.page_id).bind(2, d.id).bind(3, detection_json(d).dump());
        s.step();
    }
    tx.commit();
}

std::vector<Detection> Store::detections_for_page(const std::string& page_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT body FROM detections WHERE page_id = ? ORDER BY rowid");
    s.bind(1, page_id);
    std::string lines;
    while (s.step()) {
        lines += s.text(0);
        lines += '\n';
    }
    std::istringstream in(lines);
    return parse_detections(in, [](std::string_view) { return std::optional<PageSize>(PageSize{1 << 30, 1 << 30}); });
}

GraveRecord Store::insert_record(GraveRecord record) {
    std::lock_guard lock(mutex_);
    Transaction tx(db_);
    if (!record.publication_grave_id.empty() &&
        grave_id_taken(record.document_id, record.publication_grave_id, std::string())) {
        throw Error(ErrorCode::DuplicateGraveId, record.publication_grave_id);
    }
    Statement s(db_,
                "INSERT INTO records (document_id, page_index, grave_detection_id, publication_grave_id, status, "
                "version, body) VALUES (?, ?, ?, ?, ?, ?, '{}')");
    s.bind(1, record.document_id).bind(2, record.page_index).bind(3, record.tree.grave.id);
    if (record.publication_grave_id.empty()) s.bind_null(4);
    else s.bind(4, record.publication_grave_id);
    s.bind(5, std::string(to_string(record.status))).bind(6, record.version);
    s.step();
    const std::int64_t rowid = sqlite3_last_insert_rowid(db_);
    record.record_id = record_id_for(rowid);
    if (record.outline) record.outline->source_record_id = record.record_id;
    Statement body(db_, "UPDATE records SET body = ? WHERE rowid_ = ?");
    body.bind(1, record_body(record)).bind(2, rowid);
    body.step();
    for (std::size_t i = 0; i < record.edit_log.size(); ++i) {
        const EditLogEntry& e = record.edit_log[i];
        Statement log(db_, "INSERT INTO edit_log (record_rowid, seq, timestamp, step, change) VALUES (?, ?, ?, ?, ?)");
        log.bind(1, rowid).bind(2, static_cast<int>(i)).bind(3, e.timestamp).bind(4, e.step).bind(5, e.change);
        log.step();
    }
    tx.commit();
    return record;
}

GraveRecord Store::load_record(std::int64_t rowid) const {
    Statement s(db_, "SELECT body FROM records WHERE rowid_ = ?");
    s.bind(1, rowid);
    if (!s.step()) throw Error(ErrorCode::UnknownRecord, record_id_for(rowid));
    GraveRecord r = record_from_json(nlohmann::json::parse(s.text(0)));
    Statement log(db_, "SELECT timestamp, step, change FROM edit_log WHERE record_rowid = ? ORDER BY seq");
    log.bind(1, rowid);
    r.edit_log.clear();
    while (log.step()) r.edit_log.push_back({log.text(0), static_cast<int>(log.integer(1)), log.text(2)});
    return r;
}

std::optional<GraveRecord> Store::record(const std::string& record_id) const {
    std::lock_guard lock(mutex_);
    const auto rowid = rowid_for(record_id);
    if (!rowid) return std::nullopt;
    Statement s(db_, "SELECT 1 FROM records WHERE rowid_ = ?");
    s.bind(1, *rowid);
    if (!s.step()) return std::nullopt;
    return load_record(*rowid);
}

std::vector<GraveRecord> Store::records_for_document(const std::string& document_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT rowid_ FROM records WHERE document_id = ? ORDER BY rowid_");
    s.bind(1, document_id);
    std::vector<std::int64_t> ids;
    while (s.step()) ids.push_back(s.integer(0));
    std::vector<GraveRecord> out;
    out.reserve(ids.size());
    for (std::int64_t id : ids) out.push_back(load_record(id));
    return out;
}

std::optional<std::string> Store::record_for_grave_detection(const std::string& document_id,
                                                             const std::string& detection_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT rowid_ FROM records WHERE document_id = ? AND grave_detection_id = ?");
    s.bind(1, document_id).bind(2, detection_id);
    if (!s.step()) return std::nullopt;
    return record_id_for(s.integer(0));
}

bool Store::grave_id_taken(const std::string& document_id, const std::string& grave_id,
                           const std::string& except_record_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_,
                "SELECT rowid_ FROM records WHERE document_id = ? AND publication_grave_id = ? "
                "AND status <> 'Discarded'");
    s.bind(1, document_id).bind(2, grave_id);
    const auto except = rowid_for(except_record_id);
    while (s.step()) {
        if (!except || s.integer(0) != *except) return true;
    }
    return false;
}

void Store::update_record(const GraveRecord& updated, int expected_version) {
    std::lock_guard lock(mutex_);
    const auto rowid = rowid_for(updated.record_id);
    if (!rowid) throw Error(ErrorCode::UnknownRecord, updated.record_id);
    Transaction tx(db_);
    Statement cur(db_, "SELECT version FROM records WHERE rowid_ = ?");
    cur.bind(1, *rowid);
    if (!cur.step()) throw Error(ErrorCode::UnknownRecord, updated.record_id);
    const auto stored_version = static_cast<int>(cur.integer(0));
    if (stored_version != expected_version) {
        throw Error(ErrorCode::StaleVersion, "record " + updated.record_id + " is at version " +
                                                 std::to_string(stored_version) + ", not " +
                                                 std::to_string(expected_version));
    }
    if (!updated.publication_grave_id.empty() && updated.status != ValidationStatus::Discarded &&
        grave_id_taken(updated.document_id, updated.publication_grave_id, updated.record_id)) {
        throw Error(ErrorCode::DuplicateGraveId, updated.publication_grave_id);
    }

    Statement count(db_, "SELECT COUNT(*) FROM edit_log WHERE record_rowid = ?");
    count.bind(1, *rowid);
    count.step();
    const auto logged = static_cast<std::size_t>(count.integer(0));

    Statement up(db_,
                 "UPDATE records SET publication_grave_id = ?, status = ?, version = ?, body = ? WHERE rowid_ = ?");
    if (updated.publication_grave_id.empty()) up.bind_null(1);
    else up.bind(1, updated.publication_grave_id);
    up.bind(2, std::string(to_string(updated.status))).bind(3, updated.version).bind(4, record_body(updated));
    up.bind(5, *rowid);
    up.step();
    for (std::size_t i = logged; i < updated.edit_log.size(); ++i) {
        const EditLogEntry& e = updated.edit_log[i];
        Statement log(db_, "INSERT INTO edit_log (record_rowid, seq, timestamp, step, change) VALUES (?, ?, ?, ?, ?)");
        log.bind(1, *rowid).bind(2, static_cast<int>(i)).bind(3, e.timestamp).bind(4, e.step).bind(5, e.change);
        log.step();
    }
    tx.commit();
}

}  // namespace gravekit

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include "darec/kv.hpp"
#include <utility>
#include <vector>

#include "darec/rng.hpp"

namespace darec::data {

struct RatingScale {
    double min = 1.0;
    double max = 5.0;

    bool contains(double r) const { return r >= min && r <= max; }
    double clip(double r) const { return std::min(std::max(r, min), max); }
};

struct RatingTriple {
    std::string user;
    std::string item;
    double rating = 0.0;
    std::optional<std::int64_t> timestamp;
};

struct RatingTriples {
    std::vector<RatingTriple> records;
    RatingScale scale;
};

// Dense rating vector of one entity plus the observation mask. Unobserved
// positions hold 0; the mask, never the value, decides what enters a loss.
struct MaskedVector {
    std::vector<double> values;
    std::vector<std::uint8_t> mask;

    std::size_t observed_count() const {
        std::size_t n = 0;
        for (auto m : mask) n += m ? 1 : 0;
        return n;
    }
};

// Sparse users x items rating matrix with dense ordinal indices and the
// original string ids kept for round-tripping.
struct RatingMatrix {
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    // rows[u] = (item ordinal, rating), sorted by item ordinal, no duplicates.
    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows;
    std::vector<std::string> user_ids;  // ordinal -> id
    std::vector<std::string> item_ids;
    std::unordered_map<std::string, std::uint32_t> user_ordinals;  // id -> ordinal
    std::unordered_map<std::string, std::uint32_t> item_ordinals;
    RatingScale scale;

    std::size_t observed_count() const {
        std::size_t n = 0;
        for (const auto& r : rows) n += r.size();
        return n;
    }

    std::optional<double> lookup(std::uint32_t u, std::uint32_t i) const {
        const auto& row = rows[u];
        auto it = std::lower_bound(row.begin(), row.end(), i,
                                   [](const auto& p, std::uint32_t key) { return p.first < key; });
        if (it != row.end() && it->first == i) return it->second;
        return std::nullopt;
    }

    // Swaps the roles of users and items (used for item-oriented training).
    RatingMatrix transposed() const {
        RatingMatrix t;
        t.n_users = n_items;
        t.n_items = n_users;
        t.user_ids = item_ids;
        t.item_ids = user_ids;
        t.user_ordinals = item_ordinals;
        t.item_ordinals = user_ordinals;
        t.scale = scale;
        t.rows.resize(t.n_users);
        for (std::uint32_t u = 0; u < n_users; ++u)
            for (const auto& [i, r] : rows[u]) t.rows[i].emplace_back(u, r);
        // rows[u] is scanned in increasing u, so each transposed row is sorted.
        return t;
    }
};

struct AlignedDataset {
    RatingMatrix source;
    RatingMatrix target;  // identical user_ids / user_ordinals as source
};

struct SplitEntry {
    std::uint32_t user;
    std::uint32_t item;
    double rating;
};

struct DomainSplit {
    std::vector<SplitEntry> train;
    std::vector<SplitEntry> validation;
    std::vector<SplitEntry> test;
};

struct Split {
    DomainSplit source;
    DomainSplit target;
};

enum class FilterOrder { AfterIntersection, BeforeIntersection };

struct IngestOptions {
    RatingScale scale;
    bool skip_header = false;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

// Parses `user_id,item_id,rating[,timestamp]` lines. Later duplicates of the
// same (user, item) pair overwrite earlier ones.
inline RatingTriples ingest_csv(const std::string& path, const IngestOptions& opts = {}) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("ingest_csv: cannot open " + path);
    RatingTriples out;
    out.scale = opts.scale;
    std::unordered_map<std::string, std::size_t> seen;  // "user\x1fitem" -> record index
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line_no == 1 && opts.skip_header) continue;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_fields(line, ',');
        if (fields.size() < 3 || fields.size() > 4)
            throw std::runtime_error("ingest_csv: malformed line " + std::to_string(line_no) +
                                     " in " + path + " (expected 3 or 4 fields)");
        RatingTriple t;
        t.user = detail::trim(fields[0]);
        t.item = detail::trim(fields[1]);
        if (t.user.empty() || t.item.empty())
            throw std::runtime_error("ingest_csv: empty id at line " + std::to_string(line_no));
        try {
            std::size_t pos = 0;
            t.rating = std::stod(detail::trim(fields[2]), &pos);
            if (pos != detail::trim(fields[2]).size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw std::runtime_error("ingest_csv: bad rating at line " + std::to_string(line_no));
        }
        if (!std::isfinite(t.rating) || !opts.scale.contains(t.rating))
            throw std::runtime_error("ingest_csv: rating outside scale [" +
                                     std::to_string(opts.scale.min) + "," +
                                     std::to_string(opts.scale.max) + "] at line " +
                                     std::to_string(line_no));
        if (fields.size() == 4) {
            try {
                t.timestamp = std::stoll(detail::trim(fields[3]));
            } catch (const std::exception&) {
                throw std::runtime_error("ingest_csv: bad timestamp at line " +
                                         std::to_string(line_no));
            }
        }
        const std::string key = t.user + '\x1f' + t.item;
        auto it = seen.find(key);
        if (it != seen.end()) {
            out.records[it->second] = std::move(t);  // keep-last
        } else {
            seen.emplace(key, out.records.size());
            out.records.push_back(std::move(t));
        }
    }
    return out;
}

namespace detail {

inline std::unordered_map<std::string, std::size_t> user_counts(const RatingTriples& t) {
    std::unordered_map<std::string, std::size_t> c;
    for (const auto& r : t.records) ++c[r.user];
    return c;
}

// Builds one domain's matrix over a fixed, shared user index.
inline RatingMatrix build_domain(const RatingTriples& triples,
                                 const std::vector<std::string>& users,
                                 const std::unordered_map<std::string, std::uint32_t>& user_ord) {
    RatingMatrix m;
    m.scale = triples.scale;
    m.user_ids = users;
    m.user_ordinals = user_ord;
    m.n_users = users.size();
    m.rows.resize(m.n_users);

    // Items in first-seen order over kept users, then re-sorted by id for a
    // stable index that does not depend on input record order.
    std::vector<std::string> items;
    std::unordered_set<std::string> item_seen;
    for (const auto& r : triples.records) {
        if (!user_ord.contains(r.user)) continue;
        if (item_seen.insert(r.item).second) items.push_back(r.item);
    }
    std::sort(items.begin(), items.end());
    m.item_ids = items;
    m.n_items = items.size();
    for (std::uint32_t i = 0; i < items.size(); ++i) m.item_ordinals.emplace(items[i], i);

    for (const auto& r : triples.records) {
        auto uit = user_ord.find(r.user);
        if (uit == user_ord.end()) continue;
        m.rows[uit->second].emplace_back(m.item_ordinals.at(r.item), r.rating);
    }
    for (auto& row : m.rows) std::sort(row.begin(), row.end());
    return m;
}

}  // namespace detail

// Keeps the users present in both domains with at least `min_ratings`
// observed ratings in each, restricts items to those rated by a kept user,
// and rebuilds dense indices. The two filter orders are both exposed; since a
// user's per-domain rating count does not depend on which other users are
// kept, they select the same user set.
inline AlignedDataset align_domains(const RatingTriples& src, const RatingTriples& tgt,
                                    std::size_t min_ratings,
                                    FilterOrder order = FilterOrder::AfterIntersection) {
    if (min_ratings < 1) throw std::invalid_argument("align_domains: min_ratings must be >= 1");
    const auto src_counts = detail::user_counts(src);
    const auto tgt_counts = detail::user_counts(tgt);

    auto passes = [&](const std::string& u) {
        auto s = src_counts.find(u);
        auto t = tgt_counts.find(u);
        return s != src_counts.end() && t != tgt_counts.end() &&
               s->second >= min_ratings && t->second >= min_ratings;
    };

    std::vector<std::string> users;
    if (order == FilterOrder::AfterIntersection) {
        for (const auto& [u, c] : src_counts)
            if (tgt_counts.contains(u) && passes(u)) users.push_back(u);
    } else {
        // Filter each domain first, then intersect the filtered user sets.
        std::unordered_set<std::string> src_ok, tgt_ok;
        for (const auto& [u, c] : src_counts)
            if (c >= min_ratings) src_ok.insert(u);
        for (const auto& [u, c] : tgt_counts)
            if (c >= min_ratings) tgt_ok.insert(u);
        for (const auto& u : src_ok)
            if (tgt_ok.contains(u)) users.push_back(u);
    }
    if (users.empty()) {
        bool any_shared = false;
        for (const auto& [u, c] : src_counts)
            if (tgt_counts.contains(u)) { any_shared = true; break; }
        throw std::runtime_error(any_shared
                                     ? "align_domains: no shared user has enough ratings"
                                     : "align_domains: user sets are disjoint");
    }
    std::sort(users.begin(), users.end());
    std::unordered_map<std::string, std::uint32_t> user_ord;
    for (std::uint32_t i = 0; i < users.size(); ++i) user_ord.emplace(users[i], i);

    AlignedDataset ds;
    ds.source = detail::build_domain(src, users, user_ord);
    ds.target = detail::build_domain(tgt, users, user_ord);
    return ds;
}

namespace detail {

inline DomainSplit split_domain(const RatingMatrix& m, double train_frac,
                                double val_frac_of_train, std::uint64_t seed) {
    std::vector<SplitEntry> entries;
    entries.reserve(m.observed_count());
    for (std::uint32_t u = 0; u < m.n_users; ++u)
        for (const auto& [i, r] : m.rows[u]) entries.push_back({u, i, r});
    auto eng = darec::nn::make_engine(seed);
    std::shuffle(entries.begin(), entries.end(), eng);

    const auto n = entries.size();
    const auto n_trainval = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(
        std::llround(val_frac_of_train * static_cast<double>(n_trainval)));
    DomainSplit s;
    s.train.assign(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(n_trainval - n_val));
    s.validation.assign(entries.begin() + static_cast<std::ptrdiff_t>(n_trainval - n_val),
                        entries.begin() + static_cast<std::ptrdiff_t>(n_trainval));
    s.test.assign(entries.begin() + static_cast<std::ptrdiff_t>(n_trainval), entries.end());
    return s;
}

}  // namespace detail

// Per-domain uniform random partition of the observed entries.
inline Split split(const AlignedDataset& ds, double train_frac, double val_frac_of_train,
                   std::uint64_t seed) {
    if (!(train_frac > 0.0 && train_frac < 1.0))
        throw std::invalid_argument("split: train_frac must be in (0,1)");
    if (!(val_frac_of_train >= 0.0 && val_frac_of_train < 1.0))
        throw std::invalid_argument("split: val_frac_of_train must be in [0,1)");
    Split s;
    s.source = detail::split_domain(ds.source, train_frac, val_frac_of_train,
                                    darec::nn::derive_seed(seed, darec::nn::SeedStream::Split, 0));
    s.target = detail::split_domain(ds.target, train_frac, val_frac_of_train,
                                    darec::nn::derive_seed(seed, darec::nn::SeedStream::Split, 1));
    return s;
}

// Same ids and dimensions as `m`, entries restricted to the given list.
inline RatingMatrix matrix_from_entries(const RatingMatrix& m,
                                        const std::vector<SplitEntry>& entries) {
    RatingMatrix out = m;
    for (auto& row : out.rows) row.clear();
    for (const auto& e : entries) {
        if (e.user >= m.n_users || e.item >= m.n_items)
            throw std::out_of_range("matrix_from_entries: entry out of bounds");
        out.rows[e.user].emplace_back(e.item, e.rating);
    }
    for (auto& row : out.rows) std::sort(row.begin(), row.end());
    return out;
}

struct Stats {
    std::size_t users = 0;
    std::size_t items = 0;
    std::size_t ratings = 0;
    double sparsity = 0.0;  // 1 - |O| / (users * items)
};

inline Stats stats(const RatingMatrix& m) {
    if (m.n_users == 0 || m.n_items == 0)
        throw std::invalid_argument("stats: zero-dimension matrix");
    Stats s;
    s.users = m.n_users;
    s.items = m.n_items;
    s.ratings = m.observed_count();
    s.sparsity = 1.0 - static_cast<double>(s.ratings) /
                           (static_cast<double>(m.n_users) * static_cast<double>(m.n_items));
    return s;
}

inline MaskedVector user_vector(const RatingMatrix& m, std::uint32_t u) {
    if (u >= m.n_users) throw std::out_of_range("user_vector: user ordinal out of range");
    MaskedVector v;
    v.values.assign(m.n_items, 0.0);
    v.mask.assign(m.n_items, 0);
    for (const auto& [i, r] : m.rows[u]) {
        v.values[i] = r;
        v.mask[i] = 1;
    }
    return v;
}

inline MaskedVector item_vector(const RatingMatrix& m, std::uint32_t i) {
    if (i >= m.n_items) throw std::out_of_range("item_vector: item ordinal out of range");
    MaskedVector v;
    v.values.assign(m.n_users, 0.0);
    v.mask.assign(m.n_users, 0);
    for (std::uint32_t u = 0; u < m.n_users; ++u) {
        if (auto r = m.lookup(u, i)) {
            v.values[u] = *r;
            v.mask[u] = 1;
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Portable aligned-dataset file: text header with counts and id maps followed
// by per-domain triple lists (see README for the grammar).

namespace detail {

inline void check_id_for_io(const std::string& id) {
    if (id.empty() || id.find_first_of(" \t\r\n") != std::string::npos)
        throw std::runtime_error("dataset io: id contains whitespace: '" + id + "'");
}

}  // namespace detail

inline void save_aligned_dataset(const AlignedDataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("save_aligned_dataset: cannot open " + path);
    os << "DAREC-ALIGNED-1\n";
    os << "users " << ds.source.n_users << "\n";
    os << "source_items " << ds.source.n_items << "\n";
    os << "target_items " << ds.target.n_items << "\n";
    os << "scale " << darec::format_double(ds.source.scale.min) << " "
       << darec::format_double(ds.source.scale.max) << "\n";
    auto write_ids = [&](const char* tag, const std::vector<std::string>& ids) {
        os << "begin " << tag << "\n";
        for (const auto& id : ids) {
            detail::check_id_for_io(id);
            os << id << "\n";
        }
        os << "end\n";
    };
    write_ids("users", ds.source.user_ids);
    write_ids("source_items", ds.source.item_ids);
    write_ids("target_items", ds.target.item_ids);
    auto write_ratings = [&](const char* tag, const RatingMatrix& m) {
        os << "begin " << tag << " " << m.observed_count() << "\n";
        for (std::uint32_t u = 0; u < m.n_users; ++u)
            for (const auto& [i, r] : m.rows[u])
                os << u << " " << i << " " << darec::format_double(r) << "\n";
        os << "end\n";
    };
    write_ratings("source_ratings", ds.source);
    write_ratings("target_ratings", ds.target);
    if (!os) throw std::runtime_error("save_aligned_dataset: write failed: " + path);
}

inline AlignedDataset load_aligned_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_aligned_dataset: cannot open " + path);
    std::string line;
    auto next_line = [&]() -> std::string {
        if (!std::getline(is, line))
            throw std::runtime_error("load_aligned_dataset: unexpected end of file");
        return line;
    };
    if (next_line() != "DAREC-ALIGNED-1")
        throw std::runtime_error("load_aligned_dataset: bad header in " + path);

    auto read_count = [&](const std::string& key) -> std::size_t {
        std::istringstream ss(next_line());
        std::string k;
        std::size_t v;
        if (!(ss >> k >> v) || k != key)
            throw std::runtime_error("load_aligned_dataset: expected '" + key + " <n>'");
        return v;
    };
    const std::size_t n_users = read_count("users");
    const std::size_t n_src_items = read_count("source_items");
    const std::size_t n_tgt_items = read_count("target_items");
    RatingScale scale;
    {
        std::istringstream ss(next_line());
        std::string k;
        if (!(ss >> k >> scale.min >> scale.max) || k != "scale")
            throw std::runtime_error("load_aligned_dataset: expected 'scale <min> <max>'");
    }
    auto read_ids = [&](const std::string& tag, std::size_t n) {
        if (next_line() != "begin " + tag)
            throw std::runtime_error("load_aligned_dataset: expected 'begin " + tag + "'");
        std::vector<std::string> ids;
        ids.reserve(n);
        for (std::size_t i = 0; i < n; ++i) ids.push_back(next_line());
        if (next_line() != "end")
            throw std::runtime_error("load_aligned_dataset: missing 'end' after " + tag);
        return ids;
    };
    const auto users = read_ids("users", n_users);
    const auto src_items = read_ids("source_items", n_src_items);
    const auto tgt_items = read_ids("target_items", n_tgt_items);

    auto make_matrix = [&](const std::vector<std::string>& items) {
        RatingMatrix m;
        m.scale = scale;
        m.n_users = n_users;
        m.n_items = items.size();
        m.user_ids = users;
        m.item_ids = items;
        for (std::uint32_t i = 0; i < users.size(); ++i) m.user_ordinals.emplace(users[i], i);
        for (std::uint32_t i = 0; i < items.size(); ++i) m.item_ordinals.emplace(items[i], i);
        m.rows.resize(n_users);
        return m;
    };
    AlignedDataset ds;
    ds.source = make_matrix(src_items);
    ds.target = make_matrix(tgt_items);

    auto read_ratings = [&](const std::string& tag, RatingMatrix& m) {
        std::istringstream hs(next_line());
        std::string b, t;
        std::size_t count;
        if (!(hs >> b >> t >> count) || b != "begin" || t != tag)
            throw std::runtime_error("load_aligned_dataset: expected 'begin " + tag + " <n>'");
        for (std::size_t k = 0; k < count; ++k) {
            std::istringstream ss(next_line());
            std::uint32_t u, i;
            double r;
            if (!(ss >> u >> i >> r))
                throw std::runtime_error("load_aligned_dataset: bad rating line in " + tag);
            if (u >= m.n_users || i >= m.n_items)
                throw std::runtime_error("load_aligned_dataset: rating out of bounds in " + tag);
            m.rows[u].emplace_back(i, r);
        }
        if (next_line() != "end")
            throw std::runtime_error("load_aligned_dataset: missing 'end' after " + tag);
        for (auto& row : m.rows) std::sort(row.begin(), row.end());
    };
    read_ratings("source_ratings", ds.source);
    read_ratings("target_ratings", ds.target);
    return ds;
}

}  // namespace darec::data

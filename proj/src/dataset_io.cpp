#include "bpl/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace bpl {

namespace {

bool parse_int(std::string_view text, std::int64_t& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

// Header form: "#users=<n> items=<m> levels=<k>".
bool parse_header(const std::string& line, std::int64_t& users, std::int64_t& items,
                  std::int64_t& levels) {
    if (line.rfind("#users=", 0) != 0) return false;
    std::size_t p1 = line.find(' ');
    std::size_t p2 = line.find(' ', p1 == std::string::npos ? p1 : p1 + 1);
    if (p1 == std::string::npos || p2 == std::string::npos) return false;
    std::string_view ufield(line.data() + 7, p1 - 7);
    std::string_view ifield(line.data() + p1 + 1, p2 - p1 - 1);
    std::string_view kfield(line.data() + p2 + 1, line.size() - p2 - 1);
    if (ifield.rfind("items=", 0) != 0 || kfield.rfind("levels=", 0) != 0) return false;
    return parse_int(ufield, users) && parse_int(ifield.substr(6), items) &&
           parse_int(kfield.substr(7), levels);
}

[[noreturn]] void fail(const std::string& what, std::size_t lineno) {
    throw std::runtime_error(what + " at line " + std::to_string(lineno));
}

}  // namespace

LoadedDataset load_tsv(const std::filesystem::path& path, int num_levels) {
    if (num_levels <= 0) throw std::runtime_error("num_levels must be positive");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path.string());

    std::int64_t header_users = -1, header_items = -1, header_levels = -1;
    bool has_header = false;

    std::vector<RatingRecord> records;
    std::unordered_map<std::int64_t, std::uint32_t> user_index, item_index;
    std::vector<std::int64_t> user_ids, item_ids;
    std::unordered_set<std::uint64_t> seen;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (lineno == 1 && parse_header(line, header_users, header_items, header_levels)) {
                if (header_users <= 0 || header_items <= 0 || header_levels <= 0) {
                    fail("invalid header dimensions", lineno);
                }
                if (header_levels != num_levels) {
                    fail("header levels=" + std::to_string(header_levels) +
                             " disagrees with requested K=" + std::to_string(num_levels),
                         lineno);
                }
                has_header = true;
            }
            continue;
        }
        std::size_t t1 = line.find('\t');
        std::size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        std::int64_t raw_user, raw_item, rating;
        if (t1 == std::string::npos || t2 == std::string::npos ||
            !parse_int(std::string_view(line).substr(0, t1), raw_user) ||
            !parse_int(std::string_view(line).substr(t1 + 1, t2 - t1 - 1), raw_item) ||
            !parse_int(std::string_view(line).substr(t2 + 1), rating)) {
            fail("malformed line", lineno);
        }
        if (rating < 1 || rating > num_levels) fail("rating out of range", lineno);

        std::uint32_t u, i;
        if (has_header) {
            if (raw_user < 0 || raw_user >= header_users) fail("user index out of range", lineno);
            if (raw_item < 0 || raw_item >= header_items) fail("item index out of range", lineno);
            u = static_cast<std::uint32_t>(raw_user);
            i = static_cast<std::uint32_t>(raw_item);
        } else {
            auto [uit, unew] = user_index.try_emplace(
                raw_user, static_cast<std::uint32_t>(user_ids.size()));
            if (unew) user_ids.push_back(raw_user);
            auto [iit, inew] = item_index.try_emplace(
                raw_item, static_cast<std::uint32_t>(item_ids.size()));
            if (inew) item_ids.push_back(raw_item);
            u = uit->second;
            i = iit->second;
        }
        if (!seen.insert(pack(Pair{u, i})).second) fail("duplicate pair", lineno);
        records.push_back(RatingRecord{u, i, static_cast<int>(rating)});
    }

    LoadedDataset out;
    if (has_header) {
        out.data = RatingDataset(static_cast<std::uint32_t>(header_users),
                                 static_cast<std::uint32_t>(header_items), num_levels,
                                 std::move(records));
        out.user_ids.resize(header_users);
        out.item_ids.resize(header_items);
        for (std::size_t k = 0; k < out.user_ids.size(); ++k) out.user_ids[k] = (std::int64_t)k;
        for (std::size_t k = 0; k < out.item_ids.size(); ++k) out.item_ids[k] = (std::int64_t)k;
        out.reindexed = false;
    } else {
        if (records.empty()) {
            throw std::runtime_error("empty dataset and no header to infer dimensions: " +
                                     path.string());
        }
        out.data = RatingDataset(static_cast<std::uint32_t>(user_ids.size()),
                                 static_cast<std::uint32_t>(item_ids.size()), num_levels,
                                 std::move(records));
        out.user_ids = std::move(user_ids);
        out.item_ids = std::move(item_ids);
        out.reindexed = true;
    }
    return out;
}

void save_tsv(const RatingDataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path.string());
    out << "#users=" << data.num_users() << " items=" << data.num_items()
        << " levels=" << data.num_levels() << "\n";
    for (const RatingRecord& r : data.records()) {
        out << r.user << '\t' << r.item << '\t' << r.rating << '\n';
    }
}

void write_id_maps(const LoadedDataset& loaded, const std::filesystem::path& dir,
                   const std::string& stem) {
    auto write_one = [&](const std::vector<std::int64_t>& ids, const std::string& kind) {
        std::filesystem::path p = dir / (stem + "." + kind + ".tsv");
        std::ofstream out(p, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write id map: " + p.string());
        for (std::size_t dense = 0; dense < ids.size(); ++dense) {
            out << dense << '\t' << ids[dense] << '\n';
        }
    };
    write_one(loaded.user_ids, "users");
    write_one(loaded.item_ids, "items");
}

}  // namespace bpl

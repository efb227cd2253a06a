#include "kcgn/bundle.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "kcgn/error.hpp"
#include "kcgn/evaluation.hpp"

namespace kcgn {
namespace fs = std::filesystem;

std::uint32_t Vocabulary::intern(const std::string& id) {
  auto [it, inserted] = index_.try_emplace(id, static_cast<std::uint32_t>(ids_.size()));
  if (inserted) ids_.push_back(id);
  return it->second;
}

std::optional<std::uint32_t> Vocabulary::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary Vocabulary::from_ids(std::vector<std::string> ids) {
  Vocabulary v;
  for (auto& id : ids) {
    if (v.find(id)) throw IngestionError("vocabulary: duplicate id '" + id + "'");
    v.intern(id);
  }
  return v;
}

namespace {

constexpr char kRecordMagic[8] = {'K', 'C', 'G', 'N', 'R', 'E', 'C', '1'};

struct Line {
  std::size_t number;
  std::vector<std::string> fields;
};

/// Non-blank, non-comment lines split on tabs and spaces.
std::vector<Line> read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");
  std::vector<Line> out;
  std::string raw;
  std::size_t n = 0;
  while (std::getline(in, raw)) {
    ++n;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty() || raw[0] == '#') continue;
    std::istringstream ls(raw);
    Line line{n, {}};
    for (std::string f; ls >> f;) line.fields.push_back(f);
    if (!line.fields.empty()) out.push_back(std::move(line));
  }
  return out;
}

[[noreturn]] void malformed(const fs::path& path, std::size_t line, const std::string& what) {
  throw IngestionError(fmt::format("{}:{}: {}", path.string(), line, what));
}

std::int64_t parse_timestamp(const fs::path& path, const Line& line, const std::string& text) {
  std::int64_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) malformed(path, line.number, "bad timestamp '" + text + "'");
  return v;
}

Vocabulary type_vocabulary(const std::vector<Line>& lines, const PrepareOptions& opts) {
  switch (opts.type_order) {
    case TypeOrder::FirstAppearance: {
      Vocabulary v;
      for (const auto& l : lines)
        if (l.fields.size() == 4) v.intern(l.fields[2]);
      return v;
    }
    case TypeOrder::Numeric: {
      std::vector<std::pair<double, std::string>> labels;
      std::map<std::string, bool> seen;
      for (const auto& l : lines) {
        if (l.fields.size() != 4 || seen[l.fields[2]]) continue;
        seen[l.fields[2]] = true;
        double v = 0.0;
        const auto& t = l.fields[2];
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size()) {
          malformed(opts.interactions, l.number, "type '" + t + "' is not numeric");
        }
        labels.emplace_back(v, t);
      }
      std::stable_sort(labels.begin(), labels.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<std::string> ids;
      for (auto& [v, t] : labels) ids.push_back(t);
      return Vocabulary::from_ids(ids);
    }
    case TypeOrder::Rating:
      return Vocabulary::from_ids(kRatingTypeLabels);
    case TypeOrder::Explicit:
      if (opts.type_labels.empty()) throw ConfigError("explicit type order needs type labels");
      return Vocabulary::from_ids(opts.type_labels);
  }
  return {};
}

std::uint32_t rating_type(const fs::path& path, std::size_t line, const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || v < 1.0 || v > 5.0 ||
      v != static_cast<double>(static_cast<int>(v))) {
    malformed(path, line, "rating '" + text + "' is not an integer in 1..5");
  }
  return static_cast<std::uint32_t>(v) - 1;
}

void write_lines(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write '" + path.string() + "'");
  out << text;
}

void write_vocab(const fs::path& path, const Vocabulary& v) {
  std::string text;
  for (const auto& id : v.ids()) text += id + "\n";
  write_lines(path, text);
}

Vocabulary read_vocab(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");
  std::vector<std::string> ids;
  for (std::string line; std::getline(in, line);) ids.push_back(line);
  return Vocabulary::from_ids(std::move(ids));
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> read_pairs(const fs::path& path,
                                                                std::size_t first_bound,
                                                                std::size_t second_bound) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (const auto& line : read_table(path)) {
    if (line.fields.size() != 2) malformed(path, line.number, "expected two fields");
    std::uint32_t a = 0, b = 0;
    const auto& fa = line.fields[0];
    const auto& fb = line.fields[1];
    auto ra = std::from_chars(fa.data(), fa.data() + fa.size(), a);
    auto rb = std::from_chars(fb.data(), fb.data() + fb.size(), b);
    if (ra.ec != std::errc() || rb.ec != std::errc() || a >= first_bound || b >= second_bound) {
      malformed(path, line.number, "index out of range");
    }
    out.emplace_back(a, b);
  }
  return out;
}

std::map<std::string, std::string> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");
  std::map<std::string, std::string> out;
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

}  // namespace

void write_records(const fs::path& path, std::span<const InteractionRecord> records) {
  std::string bytes(kRecordMagic, sizeof kRecordMagic);
  auto put = [&](auto v) {
    using U = std::make_unsigned_t<decltype(v)>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  };
  put(static_cast<std::uint64_t>(records.size()));
  for (const auto& r : records) {
    put(r.user);
    put(r.item);
    put(r.type);
    put(r.timestamp);
  }
  write_lines(path, bytes);
}

std::vector<InteractionRecord> read_records(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  std::size_t pos = 0;
  auto get = [&](auto& v) {
    using U = std::make_unsigned_t<std::remove_reference_t<decltype(v)>>;
    if (pos + sizeof(U) > bytes.size()) throw IngestionError("'" + path.string() + "' is truncated");
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      u |= static_cast<U>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += sizeof(U);
    v = static_cast<std::remove_reference_t<decltype(v)>>(u);
  };
  if (bytes.size() < sizeof kRecordMagic ||
      std::memcmp(bytes.data(), kRecordMagic, sizeof kRecordMagic) != 0) {
    throw IngestionError("'" + path.string() + "' is not a kcgn record file");
  }
  pos = sizeof kRecordMagic;
  std::uint64_t count = 0;
  get(count);
  if (count > (bytes.size() - pos) / 20) throw IngestionError("'" + path.string() + "' is truncated");
  std::vector<InteractionRecord> out(count);
  for (auto& r : out) {
    get(r.user);
    get(r.item);
    get(r.type);
    get(r.timestamp);
  }
  if (pos != bytes.size()) throw IngestionError("'" + path.string() + "' has trailing bytes");
  return out;
}

DatasetBundle parse_inputs(const PrepareOptions& opts, PrepareSummary* summary) {
  DatasetBundle b;
  PrepareSummary s;
  const auto lines = read_table(opts.interactions);
  for (const auto& l : lines) {
    if (l.fields.size() != 4) {
      malformed(opts.interactions, l.number,
                fmt::format("expected 4 fields (user item type timestamp), found {}",
                            l.fields.size()));
    }
  }
  b.types = type_vocabulary(lines, opts);
  for (const auto& l : lines) {
    InteractionRecord r;
    r.user = b.users.intern(l.fields[0]);
    r.item = b.items.intern(l.fields[1]);
    if (opts.type_order == TypeOrder::Rating) {
      r.type = rating_type(opts.interactions, l.number, l.fields[2]);
    } else {
      auto t = b.types.find(l.fields[2]);
      if (!t) malformed(opts.interactions, l.number, "unknown type '" + l.fields[2] + "'");
      r.type = *t;
    }
    r.timestamp = parse_timestamp(opts.interactions, l, l.fields[3]);
    b.records.push_back(r);
  }

  if (opts.social) {
    for (const auto& l : read_table(*opts.social)) {
      if (l.fields.size() != 2) malformed(*opts.social, l.number, "expected 2 fields (user user)");
      auto u = b.users.find(l.fields[0]);
      auto v = b.users.find(l.fields[1]);
      if (!u || !v) {
        ++s.dropped_social;
        continue;
      }
      b.social.emplace_back(*u, *v);
    }
    if (s.dropped_social > 0) {
      spdlog::warn("prepare: dropped {} social edge(s) naming unknown users", s.dropped_social);
    }
  }
  if (opts.items) {
    b.has_categories = true;
    for (const auto& l : read_table(*opts.items)) {
      if (l.fields.size() != 2) malformed(*opts.items, l.number, "expected 2 fields (item category)");
      auto i = b.items.find(l.fields[0]);
      if (!i) {
        ++s.dropped_item_rows;
        continue;
      }
      b.item_categories.emplace_back(*i, b.categories.intern(l.fields[1]));
    }
    if (s.dropped_item_rows > 0) {
      spdlog::warn("prepare: dropped {} item row(s) naming unknown items", s.dropped_item_rows);
    }
  }
  s.records = b.records.size();
  s.users = b.users.size();
  s.items = b.items.size();
  s.types = b.types.size();
  s.social_edges = b.social.size();
  s.item_rows = b.item_categories.size();
  s.categories = b.categories.size();
  if (summary) *summary = s;
  return b;
}

PrepareSummary write_bundle(const DatasetBundle& b, const fs::path& dir) {
  fs::create_directories(dir);
  write_records(dir / "records.bin", b.records);
  write_vocab(dir / "users.vocab", b.users);
  write_vocab(dir / "items.vocab", b.items);
  write_vocab(dir / "types.vocab", b.types);
  write_vocab(dir / "categories.vocab", b.categories);

  std::string text;
  for (auto [u, v] : b.social) text += fmt::format("{}\t{}\n", u, v);
  write_lines(dir / "social.tsv", text);
  text.clear();
  for (auto [i, c] : b.item_categories) text += fmt::format("{}\t{}\n", i, c);
  write_lines(dir / "item_categories.tsv", text);

  PrepareSummary s;
  s.records = b.records.size();
  s.users = b.users.size();
  s.items = b.items.size();
  s.types = b.types.size();
  s.social_edges = b.social.size();
  s.item_rows = b.item_categories.size();
  s.categories = b.categories.size();

  write_lines(dir / "bundle.manifest",
              fmt::format("format = kcgn-bundle-1\nrecords = {}\nusers = {}\nitems = {}\n"
                          "types = {}\nsocial_edges = {}\nitem_rows = {}\ncategories = {}\n"
                          "item_graph = {}\n",
                          s.records, s.users, s.items, s.types, s.social_edges, s.item_rows,
                          s.categories, b.has_categories ? "categories" : "cointeraction"));

  const SplitDataset split = leave_one_out_split(b.records, s.users, s.items, s.types);
  s.train_events = split.train.size();
  s.validation_users = split.validation_user_count();
  s.test_users = split.test_user_count();
  s.train_only_users = split.train_only_users.size();
  write_lines(dir / "split.manifest",
              fmt::format("protocol = leave_one_out\ntrain_events = {}\nvalidation_users = {}\n"
                          "test_users = {}\ntrain_only_users = {}\n",
                          s.train_events, s.validation_users, s.test_users, s.train_only_users));
  text = "user\tsplit\titem\ttype\ttimestamp\n";
  for (std::size_t u = 0; u < split.users; ++u) {
    const auto emit = [&](const char* role, const std::optional<HeldOutEvent>& e) {
      if (!e) return;
      text += fmt::format("{}\t{}\t{}\t{}\t{}\n", b.users.id(u), role, b.items.id(e->item),
                          b.types.id(e->type), e->timestamp);
    };
    emit("validation", split.validation[u]);
    emit("test", split.test[u]);
  }
  write_lines(dir / "split.tsv", text);
  return s;
}

PrepareSummary prepare(const PrepareOptions& options) {
  PrepareSummary parsed;
  const DatasetBundle b = parse_inputs(options, &parsed);
  PrepareSummary s = write_bundle(b, options.out_dir);
  s.dropped_social = parsed.dropped_social;
  s.dropped_item_rows = parsed.dropped_item_rows;
  return s;
}

DatasetBundle load_bundle(const fs::path& dir) {
  const auto manifest = read_manifest(dir / "bundle.manifest");
  auto it = manifest.find("format");
  if (it == manifest.end() || it->second != "kcgn-bundle-1") {
    throw IngestionError("'" + dir.string() + "' is not a prepared kcgn bundle");
  }
  DatasetBundle b;
  b.users = read_vocab(dir / "users.vocab");
  b.items = read_vocab(dir / "items.vocab");
  b.types = read_vocab(dir / "types.vocab");
  b.categories = read_vocab(dir / "categories.vocab");
  b.records = read_records(dir / "records.bin");
  for (const auto& r : b.records) {
    if (r.user >= b.users.size() || r.item >= b.items.size() || r.type >= b.types.size()) {
      throw IngestionError("records.bin references ids beyond the vocabularies");
    }
  }
  b.social = read_pairs(dir / "social.tsv", b.users.size(), b.users.size());
  b.item_categories = read_pairs(dir / "item_categories.tsv", b.items.size(), b.categories.size());
  b.has_categories = manifest.count("item_graph") && manifest.at("item_graph") == "categories";
  return b;
}

TrainingSet make_training_set(const DatasetBundle& b, const ItemGraphOptions& options) {
  TrainingSet data;
  data.split = leave_one_out_split(b.records, b.users.size(), b.items.size(), b.types.size());
  data.social = build_social_graph(b.social, b.users.size());
  data.item_graph =
      b.has_categories
          ? build_item_graph_categories(b.item_categories, b.items.size(), options.categories)
          : build_item_graph_cointeraction(data.split.train, b.items.size(), b.types.size(),
                                           options.min_common_users);
  return data;
}

}  // namespace kcgn

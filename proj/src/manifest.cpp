#include "mathrec/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mathrec/error.hpp"
#include "mathrec/synth.hpp"

namespace fs = std::filesystem;

namespace mathrec::data {

namespace {

char relpos_char(forest::RelPos rp) {
  switch (rp) {
    case forest::RelPos::Middle: return 'm';
    case forest::RelPos::Upper: return 'u';
    case forest::RelPos::Lower: return 'l';
  }
  return 'm';
}

forest::RelPos relpos_from_char(char c, int line) {
  switch (c) {
    case 'm': return forest::RelPos::Middle;
    case 'u': return forest::RelPos::Upper;
    case 'l': return forest::RelPos::Lower;
  }
  fail("CorruptRecord", "line " + std::to_string(line) + ": bad relpos code '" +
                            std::string(1, c) + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
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

long long parse_int(const std::string& s, int line, const char* field) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    fail("CorruptRecord",
         "line " + std::to_string(line) + ": bad " + field + " value '" + s + "'");
  return std::stoll(s);
}

}  // namespace

ManifestRecord make_record(const std::string& image_path, const latex::TokenSeq& tokens,
                           const latex::Vocab& vocab) {
  ManifestRecord rec;
  rec.image_path = image_path;
  rec.tokens = tokens;
  auto labels = forest::encode_position_labels(tokens);
  rec.depths = labels.depth;
  rec.relpos = labels.relpos;
  auto counts = counting::count_vector(tokens, vocab);
  std::map<std::string, long long> nonzero;
  for (size_t k = 0; k < counts.size(); ++k)
    if (counts[k] > 0.0) nonzero[vocab.lookup(static_cast<int>(k))] = std::llround(counts[k]);
  rec.counts.assign(nonzero.begin(), nonzero.end());
  return rec;
}

void write_manifest(const std::vector<ManifestRecord>& records, const std::string& path) {
  if (records.empty()) fail("InvalidArgument", "refusing to write an empty manifest");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("IoFailure", "cannot open for writing: " + path);
  for (const auto& rec : records) {
    out << rec.image_path << '\t';
    out << latex::join(rec.tokens) << '\t';
    for (size_t i = 0; i < rec.depths.size(); ++i)
      out << (i ? " " : "") << rec.depths[i];
    out << '\t';
    for (size_t i = 0; i < rec.relpos.size(); ++i)
      out << (i ? " " : "") << relpos_char(rec.relpos[i]);
    out << '\t';
    for (size_t i = 0; i < rec.counts.size(); ++i)
      out << (i ? " " : "") << rec.counts[i].first << '=' << rec.counts[i].second;
    out << '\n';
  }
  out.flush();
  if (!out) fail("IoFailure", "write failed: " + path);
}

std::vector<ManifestRecord> load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("IoFailure", "cannot open: " + path);
  std::vector<ManifestRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 5)
      fail("CorruptRecord", "line " + std::to_string(line_no) + ": expected 5 fields, got " +
                                std::to_string(fields.size()));
    ManifestRecord rec;
    rec.image_path = fields[0];
    if (rec.image_path.empty())
      fail("CorruptRecord", "line " + std::to_string(line_no) + ": empty image path");
    for (auto& tok : split(fields[1], ' ')) {
      if (tok.empty())
        fail("CorruptRecord", "line " + std::to_string(line_no) + ": empty token");
      rec.tokens.push_back(tok);
    }
    for (auto& d : split(fields[2], ' '))
      rec.depths.push_back(static_cast<int>(parse_int(d, line_no, "depth")));
    for (auto& r : split(fields[3], ' ')) {
      if (r.size() != 1)
        fail("CorruptRecord", "line " + std::to_string(line_no) + ": bad relpos item '" + r + "'");
      rec.relpos.push_back(relpos_from_char(r[0], line_no));
    }
    if (rec.depths.size() != rec.tokens.size() || rec.relpos.size() != rec.tokens.size())
      fail("CorruptRecord",
           "line " + std::to_string(line_no) + ": label length does not match token count");
    for (auto& entry : split(fields[4], ' ')) {
      auto eq = entry.rfind('=');
      if (eq == std::string::npos || eq == 0)
        fail("CorruptRecord",
             "line " + std::to_string(line_no) + ": bad count entry '" + entry + "'");
      rec.counts.emplace_back(entry.substr(0, eq),
                              parse_int(entry.substr(eq + 1), line_no, "count"));
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) fail("CorruptRecord", "line 1: manifest has no records");
  return records;
}

std::vector<ManifestRecord> build_synthetic_corpus(const std::string& dir, std::uint64_t seed,
                                                   int n, int max_depth) {
  if (n <= 0) fail("InvalidArgument", "corpus size must be positive");
  if (max_depth < 0 || max_depth > forest::kMaxDepth)
    fail("InvalidArgument", "max_depth out of range");
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "images", ec);
  if (ec) fail("IoFailure", "cannot create " + dir + ": " + ec.message());

  const auto vocab = grammar_vocab();
  std::vector<ManifestRecord> records;
  records.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto seq = synth_expression(mix_seed(seed, static_cast<std::uint64_t>(i)), max_depth);
    const auto img = render_synthetic(seq);
    char name[32];
    std::snprintf(name, sizeof(name), "images/%05d.pgm", i);
    write_pgm(img, (fs::path(dir) / name).string());
    records.push_back(make_record(name, seq, vocab));
  }
  write_manifest(records, (fs::path(dir) / "manifest.tsv").string());
  vocab.save((fs::path(dir) / "vocab.txt").string());
  return records;
}

std::vector<ExprSample> load_samples(const std::string& manifest_path,
                                     const latex::Vocab& vocab) {
  const auto records = load_manifest(manifest_path);
  const auto base = fs::path(manifest_path).parent_path();
  std::vector<ExprSample> samples;
  samples.reserve(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    ExprSample s;
    s.image = read_pgm((base / rec.image_path).string());
    s.tokens = rec.tokens;
    s.labels = forest::encode_position_labels(rec.tokens);
    if (s.labels.depth != rec.depths || s.labels.relpos != rec.relpos)
      fail("CorruptRecord", "record " + std::to_string(i + 1) + " (" + rec.image_path +
                                "): stored position labels disagree with tokens");
    s.counts = counting::count_vector(rec.tokens, vocab);
    std::map<std::string, long long> stored(rec.counts.begin(), rec.counts.end());
    for (size_t k = 0; k < s.counts.size(); ++k) {
      const auto it = stored.find(vocab.lookup(static_cast<int>(k)));
      const long long have = it == stored.end() ? 0 : it->second;
      if (have != std::llround(s.counts[k]))
        fail("CorruptRecord", "record " + std::to_string(i + 1) + " (" + rec.image_path +
                                  "): stored counts disagree with tokens");
      if (it != stored.end()) stored.erase(it);
    }
    if (!stored.empty())
      fail("CorruptRecord", "record " + std::to_string(i + 1) + " (" + rec.image_path +
                                "): counts reference unknown class '" + stored.begin()->first +
                                "'");
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace mathrec::data

#include "mathrec/inkml.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace mathrec::data {

namespace {

std::string decode_entities(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '&') {
      out += text[i];
      continue;
    }
    const size_t semi = text.find(';', i);
    if (semi == std::string::npos) fail("MalformedXml", "unterminated entity");
    const std::string name = text.substr(i + 1, semi - i - 1);
    if (name == "lt") out += '<';
    else if (name == "gt") out += '>';
    else if (name == "amp") out += '&';
    else if (name == "quot") out += '"';
    else if (name == "apos") out += '\'';
    else fail("MalformedXml", "unknown entity '&" + name + ";'");
    i = semi;
  }
  return out;
}

// Minimal well-formedness scanner for the CROHME subset. Tracks open tags,
// captures text content per element, and surfaces tag soup as MalformedXml.
struct Element {
  std::string name;
  std::string attrs;
  std::string text;
};

class Scanner {
 public:
  Scanner(const std::string& doc, InkSample& out) : doc_(doc), out_(out) {}

  void run() {
    size_t i = 0;
    const size_t n = doc_.size();
    bool saw_root = false;
    bool root_closed = false;
    while (i < n) {
      if (doc_[i] != '<') {
        if (!stack_.empty()) stack_.back().text += doc_[i];
        else if (!std::isspace(static_cast<unsigned char>(doc_[i])))
          fail("MalformedXml", "text outside the root element");
        ++i;
        continue;
      }
      if (doc_.compare(i, 4, "<!--") == 0) {
        const size_t end = doc_.find("-->", i + 4);
        if (end == std::string::npos) fail("MalformedXml", "unterminated comment");
        i = end + 3;
        continue;
      }
      if (doc_.compare(i, 2, "<?") == 0) {
        const size_t end = doc_.find("?>", i + 2);
        if (end == std::string::npos) fail("MalformedXml", "unterminated declaration");
        i = end + 2;
        continue;
      }
      if (doc_.compare(i, 2, "<!") == 0) {
        const size_t end = doc_.find('>', i + 2);
        if (end == std::string::npos) fail("MalformedXml", "unterminated doctype");
        i = end + 1;
        continue;
      }
      const size_t close = doc_.find('>', i);
      if (close == std::string::npos) fail("MalformedXml", "unterminated tag");
      std::string tag = doc_.substr(i + 1, close - i - 1);
      i = close + 1;
      if (tag.empty()) fail("MalformedXml", "empty tag");
      if (tag[0] == '/') {
        close_element(tag.substr(1));
        if (stack_.empty()) root_closed = true;
        continue;
      }
      bool self_closing = false;
      if (tag.back() == '/') {
        self_closing = true;
        tag.pop_back();
      }
      if (root_closed) fail("MalformedXml", "content after the root element");
      open_element(tag);
      saw_root = true;
      if (self_closing) close_element(stack_.back().name);
    }
    if (!stack_.empty()) fail("MalformedXml", "unclosed element '" + stack_.back().name + "'");
    if (!saw_root) fail("MalformedXml", "document has no root element");
  }

 private:
  const std::string& doc_;
  InkSample& out_;
  std::vector<Element> stack_;

  static std::string local_name(const std::string& qualified) {
    const size_t colon = qualified.find(':');
    return colon == std::string::npos ? qualified : qualified.substr(colon + 1);
  }

  void open_element(const std::string& tag) {
    Element el;
    size_t sp = 0;
    while (sp < tag.size() && !std::isspace(static_cast<unsigned char>(tag[sp]))) ++sp;
    el.name = local_name(tag.substr(0, sp));
    el.attrs = sp < tag.size() ? tag.substr(sp + 1) : "";
    if (el.name.empty()) fail("MalformedXml", "tag without a name");
    stack_.push_back(std::move(el));
  }

  void close_element(const std::string& raw_name) {
    const std::string name = local_name(raw_name);
    if (stack_.empty()) fail("MalformedXml", "'</" + name + ">' without opener");
    if (stack_.back().name != name)
      fail("MalformedXml", "'</" + name + ">' closes '" + stack_.back().name + "'");
    Element el = std::move(stack_.back());
    stack_.pop_back();
    finish_element(el);
  }

  void finish_element(const Element& el) {
    if (el.name == "trace") {
      out_.traces.push_back(parse_trace(el.text));
    } else if (el.name == "annotation" && el.attrs.find("truth") != std::string::npos &&
               out_.truth.empty()) {
      std::string t = decode_entities(el.text);
      // trim
      size_t b = t.find_first_not_of(" \t\r\n");
      size_t e = t.find_last_not_of(" \t\r\n");
      out_.truth = b == std::string::npos ? "" : t.substr(b, e - b + 1);
    }
  }

  static Trace parse_trace(const std::string& text) {
    Trace trace;
    std::stringstream groups(text);
    std::string group;
    while (std::getline(groups, group, ',')) {
      std::istringstream nums(group);
      double x = 0.0, y = 0.0;
      if (nums >> x >> y) trace.push_back({x, y});
      else if (!group.empty() && group.find_first_not_of(" \t\r\n") != std::string::npos)
        fail("MalformedXml", "unparseable trace coordinates '" + group + "'");
    }
    if (trace.empty()) fail("MalformedXml", "trace element has no points");
    return trace;
  }
};

}  // namespace

InkSample parse_inkml(const std::string& document) {
  InkSample sample;
  Scanner(document, sample).run();
  if (sample.truth.empty()) fail("MissingTruth", "no <annotation type=\"truth\"> found");
  if (sample.traces.empty()) fail("EmptyTraces", "document contains no trace elements");
  return sample;
}

InkSample parse_inkml_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("IoFailure", "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_inkml(buf.str());
}

}  // namespace mathrec::data

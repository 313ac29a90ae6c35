#include "sanmt/conllu.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "sanmt/errors.hpp"

namespace sanmt {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

void finish_sentence(GoldTree& cur, std::vector<GoldTree>& out,
                     const std::string& name, int line_no) {
  if (cur.forms.empty()) return;
  int n = static_cast<int>(cur.forms.size());
  int roots = 0;
  for (int h : cur.heads) {
    if (h < 0 || h > n)
      throw DataError(name + ":" + std::to_string(line_no) + ": head index out of range");
    if (h == 0) ++roots;
  }
  if (roots != 1)
    throw DataError(name + ":" + std::to_string(line_no) +
                    ": sentence must have exactly one root, found " + std::to_string(roots));
  out.push_back(std::move(cur));
  cur = GoldTree{};
}

}  // namespace

std::vector<GoldTree> parse_conllu(std::istream& in, const std::string& name) {
  std::vector<GoldTree> out;
  GoldTree cur;
  std::string line;
  int line_no = 0;
  int expected_id = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      finish_sentence(cur, out, name, line_no);
      expected_id = 1;
      continue;
    }
    if (line[0] == '#') continue;
    std::vector<std::string> cols = split_tabs(line);
    if (cols.size() < 8)
      throw DataError(name + ":" + std::to_string(line_no) +
                      ": expected at least 8 tab-separated columns");
    const std::string& id = cols[0];
    if (id.find('-') != std::string::npos) continue;  // multiword token range
    if (id.find('.') != std::string::npos) continue;  // empty node
    int id_val = 0, head_val = 0;
    try {
      id_val = std::stoi(id);
      head_val = std::stoi(cols[6]);
    } catch (const std::exception&) {
      throw DataError(name + ":" + std::to_string(line_no) + ": non-numeric ID or HEAD");
    }
    if (id_val != expected_id)
      throw DataError(name + ":" + std::to_string(line_no) + ": token IDs not contiguous");
    ++expected_id;
    cur.forms.push_back(cols[1]);
    cur.upos.push_back(cols[3]);
    cur.heads.push_back(head_val);
  }
  finish_sentence(cur, out, name, line_no);
  return out;
}

std::vector<GoldTree> read_conllu(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return parse_conllu(in, path);
}

void write_conllu_sentence(std::ostream& out, const std::vector<std::string>& forms,
                           const std::vector<int>& heads,
                           const std::vector<std::string>* upos) {
  for (std::size_t i = 0; i < forms.size(); ++i) {
    out << (i + 1) << '\t' << forms[i] << "\t_\t"
        << (upos ? (*upos)[i] : std::string("_")) << "\t_\t_\t" << heads[i]
        << "\t_\t_\t_\n";
  }
  out << '\n';
}

}  // namespace sanmt

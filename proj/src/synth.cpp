#include "sanmt/synth.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "sanmt/conllu.hpp"
#include "sanmt/errors.hpp"
#include "sanmt/vocab.hpp"

namespace sanmt {

namespace {

const std::vector<std::string> kNouns = {"boy",  "girl",  "dog",    "cat",  "bird",
                                         "horse", "king", "queen", "farmer", "pilot"};
const std::vector<std::string> kObjects = {"coffee", "tea",  "bread", "soup",
                                           "cake",   "rice", "corn",  "milk"};
const std::vector<std::string> kPreps = {"near", "with", "beside", "behind", "under"};
const std::vector<std::string> kVerbs = {"order",  "paint", "greet", "follow",
                                         "want",   "find",  "visit", "grab"};

std::string noun_form(const std::string& stem, bool singular) {
  return singular ? stem : stem + "s";
}

std::string verb_form(const std::string& stem, bool subject_singular) {
  // third-person agreement: +s with a singular subject, bare otherwise
  return subject_singular ? stem + "s" : stem;
}

}  // namespace

SynthSentence synth_sentence(Rng& rng) {
  SynthSentence s;
  int distractors = rng.uniform_int(1, 4);
  s.subject_singular = rng.bernoulli(0.5);

  const std::string& subj = kNouns[rng.uniform_int(0, static_cast<int>(kNouns.size()) - 1)];
  s.src.push_back(noun_form(subj, s.subject_singular));
  s.upos.push_back("NOUN");
  s.heads.push_back(0);  // filled once the verb position is known

  for (int i = 0; i < distractors; ++i) {
    const std::string& prep = kPreps[rng.uniform_int(0, static_cast<int>(kPreps.size()) - 1)];
    const std::string& noun = kNouns[rng.uniform_int(0, static_cast<int>(kNouns.size()) - 1)];
    s.src.push_back(prep);
    s.upos.push_back("ADP");
    s.heads.push_back(static_cast<int>(s.src.size()) - 1);  // attaches to preceding noun
    s.src.push_back(noun_form(noun, !s.subject_singular));  // opposite number
    s.upos.push_back("NOUN");
    s.heads.push_back(static_cast<int>(s.src.size()) - 1);  // attaches to its preposition
  }

  const std::string& verb = kVerbs[rng.uniform_int(0, static_cast<int>(kVerbs.size()) - 1)];
  s.src.push_back(verb);
  s.upos.push_back("VERB");
  s.heads.push_back(0);
  s.verb_pos = static_cast<int>(s.src.size());

  const std::string& obj = kObjects[rng.uniform_int(0, static_cast<int>(kObjects.size()) - 1)];
  s.src.push_back(obj);
  s.upos.push_back("NOUN");
  s.heads.push_back(s.verb_pos);

  s.heads[0] = s.verb_pos;  // subject attaches to the verb

  s.tgt = s.src;
  s.tgt[s.verb_pos - 1] = verb_form(verb, s.subject_singular);
  return s;
}

std::vector<SynthSentence> synth_corpus(int size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SynthSentence> out;
  out.reserve(size);
  for (int i = 0; i < size; ++i) out.push_back(synth_sentence(rng));
  return out;
}

void make_synthetic_corpus(int size, std::uint64_t seed, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream src(out_dir + "/src.txt", std::ios::binary);
  std::ofstream tgt(out_dir + "/tgt.txt", std::ios::binary);
  std::ofstream gold(out_dir + "/gold.conllu", std::ios::binary);
  if (!src || !tgt || !gold)
    throw DataError("cannot write synthetic corpus under " + out_dir);
  for (const SynthSentence& s : synth_corpus(size, seed)) {
    src << join_ws(s.src) << "\n";
    tgt << join_ws(s.tgt) << "\n";
    write_conllu_sentence(gold, s.src, s.heads, &s.upos);
  }
}

bool synth_is_verb_form(const std::string& tok) {
  static const std::set<std::string> forms = [] {
    std::set<std::string> f;
    for (const auto& v : kVerbs) {
      f.insert(v);
      f.insert(v + "s");
    }
    return f;
  }();
  return forms.count(tok) > 0;
}

bool synth_is_preposition(const std::string& tok) {
  static const std::set<std::string> preps(kPreps.begin(), kPreps.end());
  return preps.count(tok) > 0;
}

}  // namespace sanmt

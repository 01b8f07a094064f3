#include "diffid/prompt/iir.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "diffid/errors.hpp"
#include "diffid/random.hpp"

namespace diffid::prompt {

const std::vector<std::string>& default_iir_candidates() {
  static const std::vector<std::string> list = [] {
    constexpr std::string_view consonants = "bcdfghjklmnpqrstvwxz";
    constexpr std::string_view vowels = "aeiouy";
    constexpr std::size_t kCount = 10000;
    std::vector<std::string> out;
    out.reserve(kCount);
    for (char a : consonants)
      for (char b : vowels)
        for (char c : consonants) out.push_back({a, b, c});
    for (char a : consonants)
      for (char b : vowels)
        for (char c : consonants)
          for (char d : vowels) {
            if (out.size() == kCount) return out;
            out.push_back({a, b, c, d});
          }
    return out;
  }();
  return list;
}

const std::set<std::string>& default_vocabulary() {
  static const std::set<std::string> words = [] {
    std::set<std::string> out;
    std::istringstream in(
        "a an the of with and or in on at to for from by is are was be has had his her him its our "
        "photo person people man men woman women boy girl kid baby wearing carrying standing walking "
        "running sitting outdoors indoors clothes nothing bag bags red green blue yellow purple orange "
        "cyan white black gray grey pink brown dark light hat cap coat shirt pants shoe shoes dress "
        "skirt jean jeans suit tie belt box cup pen car bus cab van bike road city park wall door "
        "room day sun sky tree dog cat cow pig hen rat bat fox owl bee ant bed bug but not now new "
        "old big top hot cold wet dry far near one two six ten few all any can may man did get got "
        "let put set sit run ran see saw say said eat ate has him hit hot job joy key kin kit lab "
        "lad lag lap law lay led leg lid lip lit log lot low mad map mat mix mob mom mop mud mug "
        "nap net nod nut pad pal pan pat paw pay pet pit pop pot pub pun pup rag ram rap raw ray "
        "rib rid rig rim rip rob rod rot row rub rug rum sad sap sax sew sip sir sob sod son sop "
        "sub sum tab tag tan tap tar tax ten tin tip toe ton top toy tub tug van vat vet wag wax "
        "web wed wig win wit wok yam yes yet zip zoo back bake ball band bank bare bark base bath "
        "beam bean bear beat bell belt bend best bike bill bird bite boat body bone book boot born "
        "cake call calm came camp card care case cash cave cell coat code coin come cook cool cope "
        "copy cute dame date deal deep desk dime dine dive dome done door dose dove duke dune face "
        "fade fake fame fare farm fate fine fire five fold food fool foot fuse game gate gave gaze "
        "hall hand hate have head heat hide hike hire hole home hope huge jade joke jury kite lake "
        "lame lane late lazy life like lime line lone love mace made make male mane mate maze mice "
        "mile mine mode mole moon move mule name nape near nice nine node none nose note pace page "
        "pale pane pave pike pile pine pipe poke pole pope pose rage rake rate rice ride ripe rise "
        "robe rode role rope rose ruby rude rule safe sage sake sale same save side site size sofa "
        "sole some sore tame tape tide tile time tone tube tune vase vine vote wade wage wake wave "
        "wide wife wine wire wise woke yoke zone");
    std::string w;
    while (in >> w) out.insert(w);
    return out;
  }();
  return words;
}

std::vector<std::string> parse_token_list(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

std::string allocate_iir(const std::set<std::string>& vocabulary, const std::vector<std::string>& candidates,
                         std::uint64_t seed) {
  if (candidates.empty()) throw std::invalid_argument("allocate_iir: no candidate tokens");
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  for (std::size_t i : order) {
    if (!candidates[i].empty() && !vocabulary.contains(candidates[i])) return candidates[i];
  }
  throw ExhaustionError("allocate_iir: all " + std::to_string(candidates.size()) +
                        " candidate tokens are already in the vocabulary");
}

std::string IirRegistry::allocate(const std::set<std::string>& vocabulary, const std::vector<std::string>& candidates,
                                  std::uint64_t seed) {
  std::lock_guard lock(mutex_);
  std::set<std::string> excluded = vocabulary;
  excluded.insert(used_.begin(), used_.end());
  auto token = allocate_iir(excluded, candidates, seed);
  used_.insert(token);
  return token;
}

bool IirRegistry::claim(const std::string& token) {
  std::lock_guard lock(mutex_);
  return used_.insert(token).second;
}

std::set<std::string> IirRegistry::used() const {
  std::lock_guard lock(mutex_);
  return used_;
}

}  // namespace diffid::prompt

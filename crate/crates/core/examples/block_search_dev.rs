use gabe_core::games::{search_block_sets, SearchLimits};

fn main() {
    let limits = SearchLimits { max_solutions: 12, wide: false };
    let start = std::time::Instant::now();
    let found = search_block_sets(&limits);
    println!("{} solutions in {:.2?}", found.len(), start.elapsed());
    for (i, c) in found.iter().enumerate() {
        println!("{i}: {}", c.describe());
    }
}

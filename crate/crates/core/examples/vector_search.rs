//! Indexes memory snippets with the hashing embedder and runs top-k and
//! threshold retrieval.

use csm::embed::MemoryKind;
use csm::{HashEmbedder, VectorIndex};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let embedder = HashEmbedder::default();
    let notes = [
        ("log-1", "Felt tired and unproductive in the afternoon after staying up late.", MemoryKind::VectorLog),
        ("log-2", "Energy dips around 2-4 PM even if I sleep decently.", MemoryKind::VectorLog),
        ("log-3", "Coffee sometimes helps, but not always.", MemoryKind::VectorLog),
        ("profile-chronotype", "chronotype: Night owl", MemoryKind::ProfileEntry),
    ];
    let index = VectorIndex::build(notes.map(|(id, t, k)| (id.to_owned(), t.to_owned(), k)), &embedder)?;

    let query = "Why am I so tired in the afternoon?";
    println!("top 3 for {query:?}");
    for hit in index.top_k(&embedder, query, 3)? {
        println!("  {:.3}  {}  {}", hit.similarity, hit.item.id, hit.item.text);
    }
    println!("at least 0.3 similar:");
    for hit in index.retrieve_above(&embedder, query, 0.3)? {
        println!("  {:.3}  {}", hit.similarity, hit.item.id);
    }
    Ok(())
}

//! Prints the 12x12 path-conflict table as CSV, plus a small matrix view.
//!
//! ```text
//! cargo run --example conflict_table > conflict_table.csv
//! ```

use row_pomdp::domain::{conflict_table_csv, paths_conflict, Movement};

fn main() {
    if std::env::args().any(|a| a == "--matrix") {
        let all: Vec<Movement> = Movement::all().collect();
        print!("     ");
        for m in &all {
            print!(" {}", short(m));
        }
        println!();
        for a in &all {
            print!("  {}", short(a));
            for b in &all {
                print!("  {}", if paths_conflict(*a, *b) { 'x' } else { '.' });
            }
            println!();
        }
        return;
    }
    print!("{}", conflict_table_csv());
}

fn short(m: &Movement) -> String {
    let a = format!("{:?}", m.approach);
    let i = format!("{:?}", m.intent);
    format!("{}{}", &a[..1], &i[..1])
}

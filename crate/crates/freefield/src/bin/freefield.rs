fn main() {
    println!("freefield (wip)");
}
